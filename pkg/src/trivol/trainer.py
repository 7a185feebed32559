"""End-to-end reconstruction: render posed slices, score them with -SSIM, and
back-propagate into the factors, the decoder and (optionally) the poses."""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import optim
from .bench import FAMILIES, EvalSpec, ViewSet, device_fingerprint
from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig
from .errors import ConfigError, DataError, NumericalError
from .geometry import Pose, perturb_poses, pose_errors, pose_grid_backward, pose_to_grid
from .loss import training_loss_with_grad
from .model import FactorizedModel, ImplicitModel, render_slice

log = logging.getLogger(__name__)

REPORT_COLUMNS = ["epoch", "seconds", "train_loss", "test_axial", "test_coronal", "test_sagittal"]
POSE_COLUMNS = ["pose_err_deg", "pose_err_trans"]


@dataclass
class RunReport:
    rows: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    pose_columns: bool = False

    @property
    def columns(self) -> list[str]:
        return REPORT_COLUMNS + (POSE_COLUMNS if self.pose_columns else [])

    def add(self, **row) -> None:
        if self.rows:
            if row["epoch"] <= self.rows[-1]["epoch"]:
                raise ValueError("report epochs must increase")
        self.rows.append({c: row.get(c, math.nan) for c in self.columns})

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]

    def trace(self) -> list[tuple]:
        """Every recorded value except wall-clock time, for determinism checks."""
        cols = [c for c in self.columns if c != "seconds"]
        return [tuple(r[c] for c in cols) for r in self.rows]

    def seconds_per_epoch(self) -> float:
        last = self.rows[-1]
        return last["seconds"] / max(last["epoch"], 1)

    def final(self, family: str) -> float:
        return self.rows[-1][f"test_{family}"]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            for k, v in self.metadata.items():
                fh.write(f"# {k}: {v}\n")
            wr = csv.writer(fh)
            wr.writerow(self.columns)
            for r in self.rows:
                wr.writerow([_fmt(r[c]) for c in self.columns])

    @classmethod
    def read_csv(cls, path) -> "RunReport":
        meta, rows = {}, []
        with open(path) as fh:
            lines = fh.read().splitlines()
        body = []
        for ln in lines:
            if ln.startswith("#"):
                k, _, v = ln[1:].partition(":")
                meta[k.strip()] = v.strip()
            else:
                body.append(ln)
        rd = list(csv.reader(body))
        header = rd[0]
        for vals in rd[1:]:
            row = {h: float(v) for h, v in zip(header, vals)}
            row["epoch"] = int(row["epoch"])
            rows.append(row)
        return cls(rows, meta, pose_columns=POSE_COLUMNS[0] in header)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


@dataclass
class Reconstruction:
    model: object
    poses: list[Pose]
    report: RunReport

    @property
    def field(self):
        return getattr(self.model, "field", None)

    @property
    def decoder(self):
        return self.model.decoder


# --------------------------------------------------------------------------
# model construction


def default_resolution(rows: int, cols: int) -> tuple[int, int, int]:
    """Half the slice size per axis (at least 2); depth follows the larger side.

    Coarser planes than the images get gradient at every entry from sparse
    sweeps and converge in far fewer epochs.
    """
    half = lambda n: max(2, (n + 1) // 2)
    return (half(cols), half(rows), half(max(rows, cols)))


def build_model(config: TrainConfig, resolution):
    if config.representation == "implicit":
        return ImplicitModel.create(config.implicit_degree, config.implicit_layers,
                                    config.implicit_width, config.seed)
    if config.init.startswith("atlas:"):
        model = load_checkpoint(config.init[len("atlas:"):])
        if not isinstance(model, FactorizedModel):
            raise ConfigError("atlas checkpoint does not hold a factorized field")
        f = model.field
        if (f.kind, f.rank, f.channels, tuple(f.resolution), model.encoding) != (
            config.representation, config.rank, config.channels, tuple(resolution), config.encoding
        ):
            raise ConfigError("atlas checkpoint is incompatible with the run configuration")
        return model
    return FactorizedModel.create(
        config.representation, resolution, config.rank, config.channels, config.encoding,
        config.mlp_layers, config.mlp_width, config.seed, config.combiner,
    )


def _optimizers(model, config: TrainConfig) -> dict[str, optim.OptimState]:
    states = {}
    for name in model.groups():
        if name == "field":
            states[name] = optim.OptimState("sgd", config.lr_field)
        elif name == "decoder":
            states[name] = optim.OptimState("sgd", config.lr_decoder)
        else:
            states[name] = optim.OptimState("adam", config.lr_implicit)
    return states


def _pose_from_params(vec: np.ndarray) -> Pose:
    return Pose(np.rad2deg(vec[:3]), vec[3:].copy())


def _params_from_pose(p: Pose) -> np.ndarray:
    return np.concatenate([np.deg2rad(p.euler), p.trans])


# --------------------------------------------------------------------------
# reconstruction


def reconstruct(stack, poses, config: TrainConfig = TrainConfig(), eval_volume=None,
                eval_spec: EvalSpec | None = None, model=None, true_poses=None,
                checkpoint_path=None, on_eval=None) -> Reconstruction:
    """Fit a representation to posed slices.

    One epoch is a full pass over the stack in a seed-fixed shuffled order,
    one optimizer step per ``batch_slices`` slices. With ``eval_volume``
    given, held-out views are scored every ``eval_every`` epochs (and at
    epoch 0); ``target_ssim`` and ``time_budget`` in the config stop the run
    early. ``true_poses`` adds pose-error columns to the report.
    """
    n = len(stack)
    if n != len(poses):
        raise DataError(f"stack has {n} images but {len(poses)} poses were given")
    if n < 2:
        raise DataError("need at least 2 posed slices")
    targets = [np.asarray(getattr(im, "pixels", im), dtype=np.float64) for im in stack]
    rows, cols = targets[0].shape
    if any(t.shape != (rows, cols) for t in targets):
        raise DataError("all images in the stack must share one size")

    resolution = tuple(config.resolution) or default_resolution(rows, cols)
    if model is None:
        model = build_model(config, resolution)
    dtype = model.dtype
    states = _optimizers(model, config)
    learn = config.learn_poses
    pose_params = np.array([_params_from_pose(p) for p in poses])
    pose_states = [optim.OptimState("adam", config.lr_pose) for _ in range(n)]
    plans = None if learn else [model.plan(pose_to_grid(p, rows, cols, config.extent).coords) for p in poses]

    views = None
    if eval_volume is not None:
        spec = eval_spec or EvalSpec(tuple(config.eval_families), config.eval_n, rows, cols, config.extent)
        views = ViewSet(eval_volume, spec, train_poses=list(poses) + list(true_poses or []))
    dims_xyz = eval_volume.shape_xyz if eval_volume is not None else resolution

    report = RunReport(pose_columns=true_poses is not None)
    report.metadata.update(
        representation=model.representation,
        device=device_fingerprint(),
        multiply_adds_per_pixel=model.multiply_adds_per_pixel(),
        seed=config.seed,
    )
    if model.representation == "implicit":
        report.metadata["note"] = "implicit baseline is a desk-scale stand-in, not a faithful reproduction"

    order = np.random.default_rng(config.seed).permutation(n)

    def record(epoch, seconds, train_loss):
        row = dict(epoch=epoch, seconds=seconds, train_loss=train_loss)
        scores = views.evaluate(model) if views is not None else {}
        for fam, (mean, _) in scores.items():
            row[f"test_{fam}"] = mean
        if true_poses is not None:
            cur = [_pose_from_params(v) for v in pose_params]
            ang, tr, _ = pose_errors(cur, true_poses, dims_xyz)
            row.update(pose_err_deg=ang, pose_err_trans=tr)
        report.add(**row)
        if checkpoint_path is not None:
            save_checkpoint(model, checkpoint_path)
        if on_eval is not None:
            on_eval(epoch, row)
        return scores

    def reached(scores) -> bool:
        if config.target_ssim <= 0 or not scores:
            return False
        return all(-m >= config.target_ssim for m, _ in scores.values())

    if views is not None or true_poses is not None:
        if reached(record(0, 0.0, math.nan)):
            return Reconstruction(model, [_pose_from_params(v) for v in pose_params], report)

    elapsed = 0.0
    batch = config.batch_slices
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        total = 0.0
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            model.zero_grad()
            for s in idx:
                if learn:
                    pose = _pose_from_params(pose_params[s])
                    plan = model.plan(pose_to_grid(pose, rows, cols, config.extent).coords)
                else:
                    plan = plans[s]
                y, cache = model.forward(plan)
                loss, g = training_loss_with_grad(y.reshape(rows, cols), targets[s])
                if not math.isfinite(loss):
                    raise NumericalError(
                        f"non-finite loss at epoch {epoch}, slice {int(s)}", epoch=epoch, slice_index=int(s)
                    )
                total += loss
                cg = model.backward(cache, (g / len(idx)).ravel().astype(dtype), want_coord=learn)
                if learn:
                    d_ang, d_tr = pose_grid_backward(pose, rows, cols, cg, config.extent)
                    optim.adam_step(pose_states[s], {"p": pose_params[s]}, {"p": np.concatenate([d_ang, d_tr])})
            for name, (params, grads) in model.groups().items():
                optim.step(states[name], params, grads)
        elapsed += time.perf_counter() - t0
        last = epoch == config.epochs
        out_of_time = config.time_budget > 0 and elapsed >= config.time_budget
        if epoch % config.eval_every == 0 or last or out_of_time:
            scores = record(epoch, elapsed, total / n)
            log.info("epoch %d  %.1fs  train %.4f  %s", epoch, elapsed, total / n,
                     {k: round(v[0], 4) for k, v in scores.items()})
            if reached(scores) or out_of_time:
                break

    return Reconstruction(model, [_pose_from_params(v) for v in pose_params], report)


def reconstruct_with_noisy_poses(stack, true_poses, noise: float = 3.0, config: TrainConfig = TrainConfig(),
                                 eval_volume=None, dims_xyz=None, noise_seed=None, **kwargs) -> Reconstruction:
    """Train from ground-truth poses plus U(-noise, noise) perturbation.

    Angles are perturbed in degrees and translations in voxels. Pose learning
    follows ``config.learn_poses``; the report carries the pose-error trace.
    """
    if dims_xyz is None:
        dims_xyz = eval_volume.shape_xyz if eval_volume is not None else (64, 64, 64)
    seed = config.seed if noise_seed is None else noise_seed
    noisy = perturb_poses(true_poses, noise, seed, dims_xyz)
    return reconstruct(stack, noisy, config, eval_volume=eval_volume, true_poses=true_poses, **kwargs)


def render_stack(model, poses, rows, cols, extent=1.0):
    return [render_slice(model, p, rows, cols, extent) for p in poses]
