"""Fit a reusable starting point ("atlas checkpoint") from a dense reference volume."""
from __future__ import annotations

import logging

import numpy as np

from .bench import EvalSpec, simulate_stack
from .checkpoint import save_checkpoint
from .config import TrainConfig
from .errors import ConfigError, FitFailureError
from .geometry import CORONAL_TILT, Pose
from .trainer import default_resolution, reconstruct

log = logging.getLogger(__name__)

FIT_TARGET = 0.95
FIT_FLOOR = 0.8


def lattice_poses(volume) -> list[Pose]:
    """Axial, coronal and sagittal slices through every lattice plane of the volume."""
    d, h, w = volume.voxels.shape
    poses = [Pose(np.zeros(3), [0.0, 0.0, t]) for t in np.linspace(-1.0, 1.0, d)]
    poses += [Pose([0.0, 0.0, CORONAL_TILT], [0.0, t, 0.0]) for t in np.linspace(-1.0, 1.0, h)]
    poses += [Pose([90.0, 0.0, CORONAL_TILT], [t, 0.0, 0.0]) for t in np.linspace(-1.0, 1.0, w)]
    return poses


def init_from_atlas(atlas, resolution=None, rank: int = 5, channels: int = 10, config: TrainConfig | None = None,
                    max_epochs: int = 400, eval_n: int = 16, checkpoint_path=None):
    """Fit a tri-planar model to ``atlas`` and return it (field plus decoder).

    Training runs on the dense three-family lattice stack and stops once every
    held-out family reaches SSIM 0.95 or ``max_epochs`` passes. A fit that
    ends below SSIM 0.8 on any family raises FitFailureError.
    """
    cfg = config or TrainConfig()
    if cfg.representation != "triplanar":
        raise ConfigError("atlas fitting supports the tri-planar representation only")
    d, h, w = atlas.voxels.shape
    # same default as a reconstruction from (H, W) slices, so the checkpoint drops in
    resolution = tuple(resolution or default_resolution(h, w))
    cfg = cfg.replace(
        rank=rank, channels=channels, resolution=resolution, epochs=max_epochs, init="random",
        learn_poses=False, target_ssim=FIT_TARGET, eval_every=min(cfg.eval_every, 10),
    )
    poses = lattice_poses(atlas)
    # every family is rendered at (H, W) so the stack shares one image size
    stack = simulate_stack(atlas, poses, h, w)
    spec = EvalSpec(("axial", "coronal", "sagittal"), eval_n, h, w)
    res = reconstruct(stack, poses, cfg, eval_volume=atlas, eval_spec=spec)
    last = res.report.rows[-1]
    worst = min(-last[f"test_{f}"] for f in spec.families)
    log.info("atlas fit: %d epochs, worst held-out SSIM %.4f", last["epoch"], worst)
    if not np.isfinite(worst) or worst < FIT_FLOOR:
        raise FitFailureError(f"atlas fit reached SSIM {worst:.4f} after {last['epoch']} epochs (needs {FIT_FLOOR})")
    if checkpoint_path is not None:
        save_checkpoint(res.model, checkpoint_path)
    return res.model
