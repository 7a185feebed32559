"""Factorized volume fields: tri-planar (three planes per rank) and CP (three vectors per rank).

A field has resolution (I, J, K) along (x, y, z), rank R and C channels. For
every channel the value at integer index (i, j, k) is

    tri-planar:  sum_r  XY[i, j] o YZ[j, k] o XZ[i, k]     (o = product or sum)
    CP:          sum_r  vX[i] * vY[j] * vZ[k]

with bilinear (planes) or linear (vectors) interpolation at fractional
indices. Normalized coordinates map to indices corner-aligned,
``i = (x + 1) / 2 * (I - 1)``; coordinates outside [-1, 1] are clamped to
the boundary and receive no gradient along the clamped axis.

Factors are stored as ``(..., C, R)`` arrays so the (channel, rank) axis is
contiguous for the sampling kernels.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DataError

DENSE_LIMIT = 2**24


@dataclass
class TriPlanarField:
    xy: np.ndarray  # (I, J, C, R)
    yz: np.ndarray  # (J, K, C, R)
    xz: np.ndarray  # (I, K, C, R)
    combiner: str = "product"

    kind = "triplanar"

    def __post_init__(self):
        if self.combiner not in ("product", "sum"):
            raise ValueError(f"unknown combiner {self.combiner!r}")
        i, j, c, r = self.xy.shape
        k = self.yz.shape[1]
        if self.yz.shape != (j, k, c, r) or self.xz.shape != (i, k, c, r):
            raise DataError("plane shapes do not agree with one resolution")
        if min(i, j, k) < 2 or c < 1 or r < 1:
            raise DataError("resolution must be >= 2 per axis with R, C >= 1")

    @property
    def resolution(self) -> tuple[int, int, int]:
        return (self.xy.shape[0], self.xy.shape[1], self.yz.shape[1])

    @property
    def rank(self) -> int:
        return self.xy.shape[3]

    @property
    def channels(self) -> int:
        return self.xy.shape[2]

    @property
    def dtype(self):
        return self.xy.dtype

    def params(self) -> dict[str, np.ndarray]:
        return {"xy": self.xy, "yz": self.yz, "xz": self.xz}

    def copy(self) -> "TriPlanarField":
        return TriPlanarField(self.xy.copy(), self.yz.copy(), self.xz.copy(), self.combiner)

    def astype(self, dtype) -> "TriPlanarField":
        return TriPlanarField(
            self.xy.astype(dtype), self.yz.astype(dtype), self.xz.astype(dtype), self.combiner
        )


@dataclass
class CPField:
    vx: np.ndarray  # (I, C, R)
    vy: np.ndarray  # (J, C, R)
    vz: np.ndarray  # (K, C, R)

    kind = "cp"
    combiner = "product"

    def __post_init__(self):
        c, r = self.vx.shape[1:]
        if self.vy.shape[1:] != (c, r) or self.vz.shape[1:] != (c, r):
            raise DataError("factor vectors disagree on channels/rank")
        if min(self.resolution) < 2 or c < 1 or r < 1:
            raise DataError("resolution must be >= 2 per axis with R, C >= 1")

    @property
    def resolution(self) -> tuple[int, int, int]:
        return (self.vx.shape[0], self.vy.shape[0], self.vz.shape[0])

    @property
    def rank(self) -> int:
        return self.vx.shape[2]

    @property
    def channels(self) -> int:
        return self.vx.shape[1]

    @property
    def dtype(self):
        return self.vx.dtype

    def params(self) -> dict[str, np.ndarray]:
        return {"vx": self.vx, "vy": self.vy, "vz": self.vz}

    def copy(self) -> "CPField":
        return CPField(self.vx.copy(), self.vy.copy(), self.vz.copy())

    def astype(self, dtype) -> "CPField":
        return CPField(self.vx.astype(dtype), self.vy.astype(dtype), self.vz.astype(dtype))


Field = TriPlanarField | CPField


class FieldGradients(dict):
    """Gradient buffers keyed like ``field.params()``."""

    @classmethod
    def like(cls, field: Field) -> "FieldGradients":
        return cls({k: np.zeros_like(v) for k, v in field.params().items()})

    def zero(self) -> None:
        for v in self.values():
            v.fill(0)


def parameter_count(field: Field) -> int:
    return sum(v.size for v in field.params().values())


def expected_parameter_count(kind: str, resolution, rank: int, channels: int) -> int:
    i, j, k = resolution
    if kind == "triplanar":
        return channels * rank * (i * j + j * k + i * k)
    return channels * rank * (i + j + k)


# --------------------------------------------------------------------------
# sampling


@dataclass
class SamplePlan:
    """Corner indices and interpolation weights for a batch of coordinates."""

    i0: np.ndarray  # (n, 3) int64
    w: np.ndarray  # (n, 6) field dtype
    ds: np.ndarray  # (n, 3) field dtype, d index / d coord (0 where clamped)


def plan_samples(coords, resolution, dtype=np.float32) -> SamplePlan:
    c = np.asarray(coords, dtype=np.float64).reshape(-1, 3)
    if not np.all(np.isfinite(c)):
        raise DataError("non-finite sample coordinate")
    size = np.asarray(resolution, dtype=np.float64)
    scale = (size - 1.0) / 2.0
    clamped = (c < -1.0) | (c > 1.0)
    t = (np.clip(c, -1.0, 1.0) + 1.0) * scale
    i0 = np.minimum(np.floor(t), size - 2.0).astype(np.int64)
    f = t - i0
    w = np.empty((c.shape[0], 6), dtype=dtype)
    w[:, 0::2] = 1.0 - f
    w[:, 1::2] = f
    ds = np.where(clamped, 0.0, scale).astype(dtype)
    return SamplePlan(i0, w, ds)


def _flat(a: np.ndarray) -> np.ndarray:
    return a.reshape(a.shape[0], a.shape[1], -1) if a.ndim == 4 else a.reshape(a.shape[0], -1)


def sample_planned(field: Field, plan: SamplePlan) -> np.ndarray:
    out = np.zeros((plan.i0.shape[0], field.channels), dtype=field.dtype)
    if field.kind == "triplanar":
        _kernels.triplanar_forward(
            _flat(field.xy), _flat(field.yz), _flat(field.xz), plan.i0, plan.w,
            field.channels, field.combiner == "product", out,
        )
    else:
        _kernels.cp_forward(
            _flat(field.vx), _flat(field.vy), _flat(field.vz), plan.i0, plan.w, field.channels, out
        )
    return out


def sample(field: Field, coords) -> np.ndarray:
    """C-channel features at normalized coordinates; (n, 3) -> (n, C), (3,) -> (C,)."""
    single = np.ndim(coords) == 1
    out = sample_planned(field, plan_samples(coords, field.resolution, field.dtype))
    return out[0] if single else out


def sample_triplanar(field: TriPlanarField, coords) -> np.ndarray:
    if field.kind != "triplanar":
        raise TypeError("expected a TriPlanarField")
    return sample(field, coords)


def sample_cp(field: CPField, coords) -> np.ndarray:
    if field.kind != "cp":
        raise TypeError("expected a CPField")
    return sample(field, coords)


def backward_planned(field: Field, plan: SamplePlan, upstream, grads: FieldGradients, want_coord=True):
    g = np.ascontiguousarray(upstream, dtype=field.dtype).reshape(-1, field.channels)
    cg = np.zeros((plan.i0.shape[0], 3), dtype=field.dtype)
    if field.kind == "triplanar":
        planes = (_flat(field.xy), _flat(field.yz), _flat(field.xz))
        product = field.combiner == "product"
        _kernels.triplanar_backward(
            *planes, plan.i0, plan.w, g, _flat(grads["xy"]), _flat(grads["yz"]), _flat(grads["xz"]),
            field.channels, product,
        )
        if want_coord:
            _kernels.triplanar_coord_grad(*planes, plan.i0, plan.w, plan.ds, g, field.channels, product, cg)
    else:
        _kernels.cp_backward(
            _flat(field.vx), _flat(field.vy), _flat(field.vz), plan.i0, plan.w, plan.ds, g,
            _flat(grads["vx"]), _flat(grads["vy"]), _flat(grads["vz"]),
            field.channels, want_coord, cg,
        )
    return cg


def backward_sample(field: Field, coords, upstream, grads: FieldGradients) -> np.ndarray:
    """Accumulate d(loss)/d(factor) into ``grads``; return d(loss)/d(coords).

    ``upstream`` holds d(loss)/d(feature), shaped like the forward output.
    """
    single = np.ndim(coords) == 1
    plan = plan_samples(coords, field.resolution, field.dtype)
    cg = backward_planned(field, plan, upstream, grads, want_coord=True)
    return cg[0] if single else cg


def reconstruct_dense(field: Field) -> np.ndarray:
    """Evaluate the factorization at every lattice index; returns (C, K, J, I).

    The (K, J, I) trailing axes follow the dense-volume memory order (z, y, x).
    """
    i, j, k = field.resolution
    if i * j * k * field.channels > DENSE_LIMIT:
        raise DataError(f"dense reconstruction of {field.resolution} x {field.channels} exceeds size guard")
    if field.kind == "cp":
        return np.einsum("icr,jcr,kcr->ckji", field.vx, field.vy, field.vz)
    if field.combiner == "product":
        return np.einsum("ijcr,jkcr,ikcr->ckji", field.xy, field.yz, field.xz)
    a = field.xy.sum(axis=3)  # (I, J, C)
    b = field.yz.sum(axis=3)  # (J, K, C)
    c = field.xz.sum(axis=3)  # (I, K, C)
    return (
        a.transpose(2, 1, 0)[:, None, :, :]
        + b.transpose(2, 1, 0)[:, :, :, None]
        + c.transpose(2, 1, 0)[:, :, None, :]
    )


# --------------------------------------------------------------------------
# initialisation


def init_field(resolution, rank: int, channels: int, kind: str = "triplanar", seed: int = 0,
               combiner: str = "product", dtype=np.float32) -> Field:
    """Random factors: U[0.9, 1.1] for multiplicative combination, U[-0.1, 0.1] for sums."""
    i, j, k = (int(v) for v in resolution)
    rng = np.random.default_rng(seed)
    lo, hi = (0.9, 1.1) if combiner == "product" or kind == "cp" else (-0.1, 0.1)

    def draw(*shape):
        return rng.uniform(lo, hi, size=shape).astype(dtype)

    if kind == "triplanar":
        return TriPlanarField(
            draw(i, j, channels, rank), draw(j, k, channels, rank), draw(i, k, channels, rank), combiner
        )
    if kind == "cp":
        return CPField(draw(i, channels, rank), draw(j, channels, rank), draw(k, channels, rank))
    raise ValueError(f"unknown field kind {kind!r}")
