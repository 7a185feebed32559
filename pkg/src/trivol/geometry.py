"""Slice poses and the 3D sample grids they induce.

A pose is three Euler angles in degrees, applied as an intrinsic Z-Y-X
rotation (``R = Rz(e0) @ Ry(e1) @ Rx(e2)``), followed by a translation in
normalized volume coordinates. The untransformed slice is the axial plane
z = 0 with x running across columns and y across rows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError


@dataclass
class Pose:
    euler: np.ndarray  # degrees, (z, y, x) intrinsic order
    trans: np.ndarray  # normalized units
    learnable: bool = False

    def __post_init__(self):
        self.euler = np.asarray(self.euler, dtype=np.float64).reshape(3)
        self.trans = np.asarray(self.trans, dtype=np.float64).reshape(3)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, vec, learnable: bool = False) -> "Pose":
        vec = np.asarray(vec, dtype=np.float64).reshape(6)
        return cls(vec[:3].copy(), vec[3:].copy(), learnable)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.euler, self.trans])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.euler)) and np.all(np.isfinite(self.trans)))


@dataclass
class SliceGrid:
    dims: tuple[int, int]
    coords: np.ndarray  # (rows * cols, 3)


def _rx(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rz(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _drx(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]])


def _dry(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]])


def _drz(t):
    c, s = math.cos(t), math.sin(t)
    return np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])


def rotation_matrix(euler_deg) -> np.ndarray:
    a, b, c = np.deg2rad(np.asarray(euler_deg, dtype=np.float64))
    return _rz(a) @ _ry(b) @ _rx(c)


def rotation_jacobian(euler_deg) -> np.ndarray:
    """dR/d(angle) for each of the three angles, per radian. Shape (3, 3, 3)."""
    a, b, c = np.deg2rad(np.asarray(euler_deg, dtype=np.float64))
    rz, ry, rx = _rz(a), _ry(b), _rx(c)
    return np.stack([_drz(a) @ ry @ rx, rz @ _dry(b) @ rx, rz @ ry @ _drx(c)])


def base_lattice(rows: int, cols: int, extent: float = 1.0) -> np.ndarray:
    """Axial z = 0 lattice, row-major, shape (rows * cols, 3)."""
    xs = np.linspace(-extent, extent, cols)
    ys = np.linspace(-extent, extent, rows)
    x, y = np.meshgrid(xs, ys)
    return np.stack([x.ravel(), y.ravel(), np.zeros(rows * cols)], axis=1)


def _check_grid_args(rows, cols, extent):
    if rows < 2 or cols < 2:
        raise DataError(f"slice grid needs rows, cols >= 2, got {rows}x{cols}")
    if not 0.0 < extent <= 1.0:
        raise DataError(f"extent must lie in (0, 1], got {extent}")


def pose_to_grid(pose: Pose, rows: int, cols: int, extent: float = 1.0) -> SliceGrid:
    _check_grid_args(rows, cols, extent)
    if not pose.is_finite():
        raise DataError(f"non-finite pose {pose.as_vector()}")
    base = base_lattice(rows, cols, extent)
    coords = base @ rotation_matrix(pose.euler).T + pose.trans
    return SliceGrid((rows, cols), coords)


def pose_grid_backward(pose: Pose, rows: int, cols: int, coord_grad: np.ndarray, extent: float = 1.0):
    """Chain coordinate gradients (n, 3) back onto the pose.

    Returns ``(d_euler, d_trans)`` with the angle gradient per radian.
    """
    base = base_lattice(rows, cols, extent)
    g = np.asarray(coord_grad, dtype=np.float64)
    outer = g.T @ base  # sum_p g_p b_p^T
    d_euler = np.einsum("kij,ij->k", rotation_jacobian(pose.euler), outer)
    return d_euler, g.sum(axis=0)


def axial_stack_poses(n: int) -> list[Pose]:
    if n < 2:
        raise DataError(f"need at least 2 slices, got {n}")
    return [Pose(np.zeros(3), [0.0, 0.0, z]) for z in np.linspace(-1.0, 1.0, n)]


CORONAL_TILT = 90.0


def rotated_coronal_poses(n: int) -> list[Pose]:
    """Coronal slices swept through 360 degrees about the vertical (z) axis.

    The axial base plane is tipped 90 degrees about x, which puts it in the
    y = 0 plane with its columns along x and rows along z; the sweep angle is
    then the z rotation.
    """
    if n < 2:
        raise DataError(f"need at least 2 slices, got {n}")
    return [Pose([k * 360.0 / n, 0.0, CORONAL_TILT], np.zeros(3)) for k in range(n)]


def family_poses(family: str, n: int) -> list[Pose]:
    """Parallel test views, strictly inside the cube (endpoints excluded)."""
    offsets = np.linspace(-1.0, 1.0, n + 2)[1:-1]
    if family == "axial":
        return [Pose(np.zeros(3), [0.0, 0.0, t]) for t in offsets]
    if family == "coronal":
        return [Pose([0.0, 0.0, CORONAL_TILT], [0.0, t, 0.0]) for t in offsets]
    if family == "sagittal":
        return [Pose([90.0, 0.0, CORONAL_TILT], [t, 0.0, 0.0]) for t in offsets]
    raise ValueError(f"unknown view family {family!r}")


def perturb_poses(poses, noise_halfwidth: float, seed: int, dims_xyz=(64, 64, 64)) -> list[Pose]:
    """Add U(-h, h) noise: degrees to angles, voxels to translations.

    Voxel offsets are converted to normalized units with ``2 / (dim - 1)``
    along each axis of ``dims_xyz``.
    """
    if noise_halfwidth < 0:
        raise ValueError("noise half-width must be non-negative")
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-noise_halfwidth, noise_halfwidth, size=(len(poses), 6))
    vox = 2.0 / (np.asarray(dims_xyz, dtype=np.float64) - 1.0)
    out = []
    for p, e in zip(poses, noise):
        out.append(Pose(p.euler + e[:3], p.trans + e[3:] * vox, p.learnable))
    return out


def pose_errors(poses, reference, dims_xyz=(64, 64, 64)) -> tuple[float, float, float]:
    """Mean absolute error: angles (deg), translations (normalized), translations (voxels)."""
    a = np.array([p.as_vector() for p in poses])
    b = np.array([p.as_vector() for p in reference])
    ang = np.abs(a[:, :3] - b[:, :3]).mean()
    tr = np.abs(a[:, 3:] - b[:, 3:])
    vox = tr / (2.0 / (np.asarray(dims_xyz, dtype=np.float64) - 1.0))
    return float(ang), float(tr.mean()), float(vox.mean())


# --------------------------------------------------------------------------
# pose tables


def write_pose_table(path, poses, comment: str | None = None) -> None:
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append("# euler_z_deg euler_y_deg euler_x_deg t_x t_y t_z")
    for p in poses:
        lines.append(" ".join(repr(float(v)) for v in p.as_vector()))
    Path(path).write_text("\n".join(lines) + "\n")


def parse_pose(text: str) -> Pose:
    parts = text.replace(",", " ").split()
    if len(parts) != 6:
        raise DataError(f"pose needs 6 numbers (3 angles, 3 translations), got {len(parts)}: {text!r}")
    try:
        vals = [float(v) for v in parts]
    except ValueError as exc:
        raise DataError(f"malformed pose {text!r}") from exc
    pose = Pose.from_vector(vals)
    if not pose.is_finite():
        raise DataError(f"non-finite pose {text!r}")
    return pose


def read_pose_table(path) -> list[Pose]:
    poses = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            poses.append(parse_pose(line))
    return poses
