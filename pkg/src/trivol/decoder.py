"""Small ReLU MLP with a sigmoid head, with a hand-written backward pass."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

# the ablation grid: (layers, hidden width)
ABLATION_NETWORKS = [(2, 128), (3, 128), (4, 128), (3, 32), (3, 64), (2, 64)]


@dataclass(frozen=True)
class MlpConfig:
    n_layers: int = 2
    hidden_width: int = 64
    input_width: int = 50
    output_width: int = 1

    def __post_init__(self):
        if self.n_layers < 1:
            raise DataError("MLP needs at least one layer")

    @property
    def sizes(self) -> list[int]:
        return [self.input_width] + [self.hidden_width] * (self.n_layers - 1) + [self.output_width]

    @property
    def name(self) -> str:
        return f"MLP {self.n_layers}-{self.hidden_width}"


@dataclass
class MlpParams:
    weights: list[np.ndarray]  # each (fan_in, fan_out)
    biases: list[np.ndarray]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def input_width(self) -> int:
        return self.weights[0].shape[0]

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{i}"] = w
            out[f"b{i}"] = b
        return out

    def zeros_like(self) -> "MlpParams":
        return MlpParams([np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases])

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def multiply_adds(self) -> int:
        return sum(w.size for w in self.weights)


def init_mlp(config: MlpConfig, seed: int = 0, dtype=np.float32) -> MlpParams:
    """He-uniform hidden layers; the sigmoid head uses the tighter 1/sqrt(fan_in) bound.

    All biases start at zero.
    """
    rng = np.random.default_rng(seed)
    sizes = config.sizes
    weights, biases = [], []
    for li, (fi, fo) in enumerate(zip(sizes[:-1], sizes[1:])):
        last = li == len(sizes) - 2
        bound = np.sqrt(1.0 / fi) if last else np.sqrt(6.0 / fi)
        weights.append(rng.uniform(-bound, bound, size=(fi, fo)).astype(dtype))
        biases.append(np.zeros(fo, dtype=dtype))
    return MlpParams(weights, biases)


def _sigmoid(z):
    # split form avoids overflow in exp for large |z|
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def mlp_forward(params: MlpParams, x, return_cache: bool = False):
    """Intensities in (0, 1), shape (n,) for a batch or a scalar for one input."""
    x = np.asarray(x)
    single = x.ndim == 1
    h = x.reshape(-1, x.shape[-1])
    if h.shape[1] != params.input_width:
        raise DataError(f"decoder expects input width {params.input_width}, got {h.shape[1]}")
    acts = [h]
    last = params.n_layers - 1
    for li, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w
        z += b
        if li < last:
            h = np.maximum(z, 0)
            acts.append(h)
        else:
            h = _sigmoid(z)
    eps = np.finfo(h.dtype).eps
    y = np.clip(h[:, 0], eps, 1.0 - eps)
    out = y[0] if single else y
    if return_cache:
        return out, (acts, y)
    return out


def mlp_backward(params: MlpParams, x, upstream, cache=None):
    """Return (param gradients, input gradient) for d(loss)/d(output) = ``upstream``.

    ReLU is treated as having zero slope at 0.
    """
    x = np.asarray(x)
    single = x.ndim == 1
    if cache is None:
        _, cache = mlp_forward(params, x, return_cache=True)
    acts, y = cache
    g = np.asarray(upstream, dtype=y.dtype).reshape(-1, 1)
    g = g * (y * (1.0 - y))[:, None]
    grads = params.zeros_like()
    ones = np.ones(g.shape[0], dtype=g.dtype)
    for li in range(params.n_layers - 1, -1, -1):
        a = acts[li]
        w = params.weights[li]
        grads.weights[li] = a.T @ g
        # a ones-vector product is much faster than sum(axis=0) on tall arrays
        grads.biases[li] = ones @ g
        # single-output layer: broadcasting beats a rank-1 GEMM
        g = g * w[:, 0] if w.shape[1] == 1 else g @ w.T
        if li > 0:
            g *= acts[li] > 0
    dx = g[0] if single else g
    return grads, dx
