"""Novel-view accuracy tables, timing profiles and convergence comparisons."""
from __future__ import annotations

import hashlib
import math
import os
import platform
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import PoseOverlapError
from .geometry import Pose, family_poses, pose_to_grid
from .loss import DEFAULT_SSIM, ssim
from .volume_io import DenseVolume, Image2D

FAMILIES = ("axial", "coronal", "sagittal")


@dataclass(frozen=True)
class EvalSpec:
    families: tuple[str, ...] = FAMILIES
    n: int = 64
    rows: int | None = None
    cols: int | None = None
    extent: float = 1.0


def extract_slice(volume: DenseVolume, coords, rows: int, cols: int) -> Image2D:
    """Trilinear sample of the dense volume at normalized coords, clamped at the faces."""
    d, h, w = volume.voxels.shape
    c = np.clip(np.asarray(coords, dtype=np.float64), -1.0, 1.0)
    idx = np.stack(
        [(c[:, 2] + 1.0) * 0.5 * (d - 1), (c[:, 1] + 1.0) * 0.5 * (h - 1), (c[:, 0] + 1.0) * 0.5 * (w - 1)]
    )
    vals = ndimage.map_coordinates(volume.voxels.astype(np.float64), idx, order=1, mode="nearest")
    return Image2D(np.clip(vals, 0.0, 1.0).reshape(rows, cols))


def simulate_stack(volume: DenseVolume, poses, rows: int | None = None, cols: int | None = None,
                   extent: float = 1.0) -> list[Image2D]:
    """Ground-truth images of ``volume`` at each pose (defaults to the volume's H x W)."""
    d, h, w = volume.voxels.shape
    rows, cols = rows or h, cols or w
    return [extract_slice(volume, pose_to_grid(p, rows, cols, extent).coords, rows, cols) for p in poses]


def check_disjoint(test_poses, train_poses, tol: float = 1e-9) -> None:
    if not train_poses:
        return
    train = np.array([p.as_vector() for p in train_poses])
    for p in test_poses:
        if np.any(np.all(np.abs(train - p.as_vector()) <= tol, axis=1)):
            raise PoseOverlapError(f"test pose {p.as_vector().tolist()} is also a training pose")


class ViewSet:
    """Test views with their ground-truth slices, precomputed once per volume."""

    def __init__(self, volume: DenseVolume, spec: EvalSpec, train_poses=None):
        self.spec = spec
        d, h, w = volume.voxels.shape
        self.rows = spec.rows or h
        self.cols = spec.cols or w
        self.views: dict[str, list[tuple[Pose, np.ndarray, np.ndarray]]] = {}
        for fam in spec.families:
            poses = family_poses(fam, spec.n)
            check_disjoint(poses, train_poses or [])
            entries = []
            for p in poses:
                coords = pose_to_grid(p, self.rows, self.cols, spec.extent).coords
                gt = extract_slice(volume, coords, self.rows, self.cols).pixels
                entries.append((p, coords, gt))
            self.views[fam] = entries

    def scores(self, model) -> dict[str, np.ndarray]:
        """Per-view -SSIM for every family."""
        out = {}
        for fam, entries in self.views.items():
            vals = []
            for _, coords, gt in entries:
                y = model.forward(coords)[0].reshape(self.rows, self.cols)
                vals.append(-ssim(y, gt, DEFAULT_SSIM) if np.all(np.isfinite(y)) else math.nan)
            out[fam] = np.array(vals)
        return out

    def evaluate(self, model) -> dict[str, tuple[float, float]]:
        return {fam: (float(v.mean()), float(v.std())) for fam, v in self.scores(model).items()}


def evaluate(model, gt_volume: DenseVolume, spec: EvalSpec = EvalSpec(), train_poses=None):
    """Per-family (mean, population std) of -SSIM over the requested test views."""
    return ViewSet(gt_volume, spec, train_poses).evaluate(model)


def aggregate(scores) -> tuple[float, float]:
    """Mean and population std across volumes."""
    a = np.asarray(scores, dtype=np.float64)
    return float(a.mean()), float(a.std())


def format_accuracy_table(rows, families=FAMILIES) -> str:
    """Aligned text table: one row per (training sweep, method), one column per test family.

    ``rows`` holds tuples ``(sweep, method, {family: (mean, std) or None})``.
    """
    header = ["Pi", "Method", *[f.capitalize() for f in families]]
    body = []
    for sweep, method, res in rows:
        cells = []
        for f in families:
            v = res.get(f)
            cells.append("N/A" if v is None else f"{v[0]:.3f}±{v[1]:.3f}")
        body.append([sweep, method, *cells])
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(c.ljust(wd) for c, wd in zip(r, widths)) for r in [header, *body]]
    lines.insert(1, "  ".join("-" * wd for wd in widths))
    return "\n".join(lines)


# --------------------------------------------------------------------------
# timing


def device_fingerprint() -> str:
    parts = [platform.machine(), platform.processor(), platform.node(), str(os.cpu_count()),
             platform.python_version(), np.__version__]
    try:
        with open("/proc/cpuinfo") as fh:
            parts += [ln for ln in fh.read().splitlines() if ln.startswith("model name")][:1]
    except OSError:
        pass
    return hashlib.sha1("|".join(parts).encode()).hexdigest()[:16]


@dataclass
class Curve:
    label: str
    seconds: list[float]
    epochs: list[int]
    test_loss: list[float]
    seconds_per_epoch: float
    fingerprint: str
    truncated: bool = False


def speed_ratio(slow: Curve, fast: Curve) -> float:
    """Per-epoch time ratio slow / fast; refuses curves measured on different devices."""
    if slow.fingerprint != fast.fingerprint:
        raise ValueError("timing curves come from different devices; ratio is meaningless")
    return slow.seconds_per_epoch / fast.seconds_per_epoch


def epochs_to_threshold(epochs, test_loss, ssim_threshold: float = 0.9) -> int | None:
    """First recorded epoch whose test -SSIM is at or below -threshold."""
    for e, v in zip(epochs, test_loss):
        if np.isfinite(v) and -v >= ssim_threshold:
            return int(e)
    return None


def write_curves(curves, path) -> None:
    """gnuplot-friendly: one block per curve separated by two blank lines."""
    lines = []
    for c in curves:
        lines.append(f"# {c.label}  seconds_per_epoch={c.seconds_per_epoch:.6g}  "
                     f"truncated={int(c.truncated)}  device={c.fingerprint}")
        lines.append("# seconds epoch test_neg_ssim")
        for s, e, v in zip(c.seconds, c.epochs, c.test_loss):
            lines.append(f"{s:.6f} {e} {v:.6f}")
        lines += ["", ""]
    with open(path, "w") as fh:
        fh.write("\n".join(lines))


def write_curves_csv(curves, path) -> None:
    with open(path, "w") as fh:
        fh.write("label,seconds,epoch,test_neg_ssim\n")
        for c in curves:
            for s, e, v in zip(c.seconds, c.epochs, c.test_loss):
                fh.write(f"{c.label},{s:.6f},{e},{v:.6f}\n")


def timing_profile(configs, stack, poses, wall_budget: float, eval_volume: DenseVolume,
                   eval_spec: EvalSpec | None = None) -> list[Curve]:
    """Train each labelled config on the same data and device; return accuracy-vs-time curves.

    ``configs`` is a mapping or a sequence of (label, TrainConfig). Runs are
    sequential so timings do not compete. A run stopped by ``wall_budget``
    (seconds of training, 0 for none) is marked truncated.
    """
    from .trainer import reconstruct  # trainer depends on this module

    items = list(configs.items()) if isinstance(configs, dict) else list(configs)
    if len(items) < 2:
        raise ValueError("timing_profile needs at least two configs to compare")
    fp = device_fingerprint()
    fam = (eval_spec.families if eval_spec else None)
    curves = []
    for label, cfg in items:
        cfg = cfg.replace(time_budget=wall_budget)
        res = reconstruct(stack, poses, cfg, eval_volume=eval_volume, eval_spec=eval_spec)
        rep = res.report
        family = (fam or cfg.eval_families)[0]
        last = rep.rows[-1]
        truncated = wall_budget > 0 and last["epoch"] < cfg.epochs and last["seconds"] >= wall_budget
        curves.append(Curve(
            label=label,
            seconds=rep.column("seconds"),
            epochs=rep.column("epoch"),
            test_loss=rep.column(f"test_{family}"),
            seconds_per_epoch=rep.seconds_per_epoch(),
            fingerprint=fp,
            truncated=bool(truncated),
        ))
    return curves
