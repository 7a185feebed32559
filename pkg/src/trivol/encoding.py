"""Sinusoidal encoding of per-sample feature vectors.

Each scalar p becomes ``[p] + [sin(2^l pi p), cos(2^l pi p) for l < L]``, the
raw term being optional. Outputs are channel-major: all terms of channel 0,
then channel 1, and so on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError


@dataclass(frozen=True)
class EncodingConfig:
    degree: int = 2
    include_raw: bool = True

    def __post_init__(self):
        if self.degree < 0:
            raise ConfigError(f"encoding degree must be >= 0, got {self.degree}")
        if self.degree == 0 and not self.include_raw:
            raise ConfigError("encoding with L=0 and no raw input produces no output")

    @property
    def width(self) -> int:
        return 2 * self.degree + int(self.include_raw)

    def output_width(self, channels: int) -> int:
        return channels * self.width


def _freqs(degree: int, dtype) -> np.ndarray:
    return (np.pi * 2.0 ** np.arange(degree)).astype(dtype)


def _split(features):
    p = np.asarray(features)
    return p.ndim == 1, np.ascontiguousarray(p.reshape(-1, p.shape[-1]))


def encode_with_cache(features, cfg: EncodingConfig):
    """Encode (n, C) features; also return the (sin, cos) tables for the backward pass."""
    single, p2 = _split(features)
    n, c = p2.shape
    out = np.empty((n, c * cfg.width), dtype=p2.dtype)
    args = np.empty((cfg.degree, n, c), dtype=p2.dtype)
    _kernels.encode_args(p2, _freqs(cfg.degree, p2.dtype), args)
    sin_a, cos_a = np.sin(args), np.cos(args)
    _kernels.encode_interleave(p2, sin_a, cos_a, int(cfg.include_raw), out)
    return (out[0] if single else out), (sin_a, cos_a)


def encode(features, cfg: EncodingConfig) -> np.ndarray:
    return encode_with_cache(features, cfg)[0]


def encode_backward(features, cfg: EncodingConfig, upstream, cache=None) -> np.ndarray:
    """Gradient w.r.t. the features given d(loss)/d(encoding)."""
    single, p2 = _split(features)
    n, c = p2.shape
    if cache is None:
        cache = encode_with_cache(p2, cfg)[1]
    g = np.ascontiguousarray(upstream, dtype=p2.dtype).reshape(n, c * cfg.width)
    grad = np.empty((n, c), dtype=p2.dtype)
    _kernels.encode_backward(g, cache[0], cache[1], _freqs(cfg.degree, p2.dtype), int(cfg.include_raw), grad)
    return grad[0] if single else grad
