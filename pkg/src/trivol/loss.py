"""Gaussian-window SSIM, its analytic gradient, and the negative-SSIM training loss.

Local statistics use an 11x11 Gaussian (sigma 1.5) with half-sample
reflection at the borders (``d c b a | a b c d``), the same boundary rule as
``scipy.ndimage`` mode ``"reflect"``. The score is the mean of the full-size
SSIM map. Filtering is written as ``A_rows @ X @ A_cols.T`` with a banded
matrix per axis, which makes the adjoint used in the backward pass exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class SsimConfig:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 1.0

    @property
    def c1(self) -> float:
        return (self.k1 * self.data_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.data_range) ** 2


DEFAULT_SSIM = SsimConfig()


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


@lru_cache(maxsize=64)
def filter_matrix(n: int, size: int, sigma: float) -> np.ndarray:
    """(n, n) matrix applying the 1D window along an axis with reflect padding."""
    g = gaussian_window(size, sigma)
    half = size // 2
    a = np.zeros((n, n))
    for o in range(n):
        for t in range(-half, half + 1):
            s = o + t
            if s < 0:
                s = -s - 1
            elif s >= n:
                s = 2 * n - s - 1
            a[o, s] += g[t + half]
    a.setflags(write=False)
    return a


def _check(a: np.ndarray, b: np.ndarray, cfg: SsimConfig) -> None:
    if a.shape != b.shape:
        raise DataError(f"SSIM dims mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 2 or min(a.shape) < cfg.window:
        raise DataError(f"SSIM needs 2D images of at least {cfg.window}x{cfg.window}, got {a.shape}")


def _pixels(img) -> np.ndarray:
    return np.asarray(getattr(img, "pixels", img), dtype=np.float64)


def _stats(a, b, cfg):
    ar = filter_matrix(a.shape[0], cfg.window, cfg.sigma)
    ac = filter_matrix(a.shape[1], cfg.window, cfg.sigma)

    def filt(x):
        return ar @ x @ ac.T

    mu_a, mu_b = filt(a), filt(b)
    e_aa, e_bb, e_ab = filt(a * a), filt(b * b), filt(a * b)
    return (ar, ac), mu_a, mu_b, e_aa, e_bb, e_ab


def ssim_map(a, b, cfg: SsimConfig = DEFAULT_SSIM) -> np.ndarray:
    a, b = _pixels(a), _pixels(b)
    _check(a, b, cfg)
    _, mu_a, mu_b, e_aa, e_bb, e_ab = _stats(a, b, cfg)
    num1 = 2.0 * mu_a * mu_b + cfg.c1
    num2 = 2.0 * (e_ab - mu_a * mu_b) + cfg.c2
    den1 = mu_a * mu_a + mu_b * mu_b + cfg.c1
    den2 = (e_aa - mu_a * mu_a) + (e_bb - mu_b * mu_b) + cfg.c2
    return (num1 * num2) / (den1 * den2)


def ssim(a, b, cfg: SsimConfig = DEFAULT_SSIM) -> float:
    return float(ssim_map(a, b, cfg).mean())


def ssim_with_grad(a, b, cfg: SsimConfig = DEFAULT_SSIM, upstream: float = 1.0):
    """SSIM(a, b) and upstream * d SSIM / d a in one pass."""
    a, b = _pixels(a), _pixels(b)
    _check(a, b, cfg)
    (ar, ac), mu_a, mu_b, e_aa, e_bb, e_ab = _stats(a, b, cfg)
    num1 = 2.0 * mu_a * mu_b + cfg.c1
    num2 = 2.0 * (e_ab - mu_a * mu_b) + cfg.c2
    den1 = mu_a * mu_a + mu_b * mu_b + cfg.c1
    den2 = (e_aa - mu_a * mu_a) + (e_bb - mu_b * mu_b) + cfg.c2
    den = den1 * den2
    s = (num1 * num2) / den
    value = float(s.mean())

    gs = upstream / s.size
    d_num1 = gs * num2 / den
    d_num2 = gs * num1 / den
    d_den1 = -gs * s / den1
    d_den2 = -gs * s / den2
    d_mu_a = 2.0 * mu_b * (d_num1 - d_num2) + 2.0 * mu_a * (d_den1 - d_den2)
    d_e_aa = d_den2
    d_e_ab = 2.0 * d_num2

    def adj(x):
        return ar.T @ x @ ac

    grad = adj(d_mu_a) + 2.0 * a * adj(d_e_aa) + b * adj(d_e_ab)
    return value, grad


def ssim_backward(a, b, cfg: SsimConfig = DEFAULT_SSIM, upstream: float = 1.0) -> np.ndarray:
    return ssim_with_grad(a, b, cfg, upstream)[1]


def training_loss(rendered, target, cfg: SsimConfig = DEFAULT_SSIM) -> float:
    """Negative SSIM; -1 is a perfect match."""
    return -ssim(rendered, target, cfg)


def training_loss_with_grad(rendered, target, cfg: SsimConfig = DEFAULT_SSIM):
    value, grad = ssim_with_grad(rendered, target, cfg, upstream=-1.0)
    return -value, grad
