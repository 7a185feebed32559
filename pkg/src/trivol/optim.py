"""Plain SGD and Adam over dicts of numpy arrays, updated in place."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


def _check_shapes(params, grads):
    for k, p in params.items():
        if grads[k].shape != p.shape:
            raise DataError(f"gradient for {k!r} has shape {grads[k].shape}, parameter has {p.shape}")


def sgd_step(params: dict, grads: dict, lr: float) -> dict:
    """p <- p - lr * g (no momentum)."""
    _check_shapes(params, grads)
    for k, p in params.items():
        p -= np.asarray(lr * grads[k], dtype=p.dtype)
    return params


@dataclass
class OptimState:
    kind: str = "sgd"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: OptimState, params: dict, grads: dict) -> dict:
    _check_shapes(params, grads)
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for k, p in params.items():
        g = np.asarray(grads[k], dtype=np.float64)
        if k not in state.m:
            state.m[k] = np.zeros(p.shape)
            state.v[k] = np.zeros(p.shape)
        m, v = state.m[k], state.v[k]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        step = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        p -= step.astype(p.dtype)
    return params


def step(state: OptimState, params: dict, grads: dict) -> dict:
    if state.kind == "sgd":
        return sgd_step(params, grads, state.lr)
    if state.kind == "adam":
        return adam_step(state, params, grads)
    raise ValueError(f"unknown optimizer {state.kind!r}")
