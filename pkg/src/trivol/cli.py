"""Command-line entry point: ``trivol <command> ...``.

Exit codes: 0 success, 2 usage error, 3 bad input data, 4 numerical failure.
Every command writes the settings it actually ran with next to its outputs.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DataError, FitFailureError, NumericalError

log = logging.getLogger("trivol")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4


# --------------------------------------------------------------------------
# argument helpers


def _pose_arg(text: str):
    from .geometry import parse_pose

    try:
        return parse_pose(text)
    except DataError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _size_arg(text: str) -> tuple[int, int]:
    try:
        rows, cols = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 128x128, got {text!r}") from None
    if rows < 2 or cols < 2:
        raise argparse.ArgumentTypeError("size must be at least 2x2")
    return rows, cols


def _dims_arg(text: str) -> tuple[int, int, int]:
    try:
        dims = tuple(int(v) for v in text.lower().split("x"))
    except ValueError:
        dims = ()
    if len(dims) != 3:
        raise argparse.ArgumentTypeError(f"dims must look like 64x64x64 (H x W x D), got {text!r}")
    return dims


def _write_resolved(path: Path, settings: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{k} = {v}" for k, v in settings.items()]
    path.write_text("\n".join(lines) + "\n")


def _args_dict(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _load_config(args):
    from .config import TrainConfig, parse_overrides

    cfg = TrainConfig.load(args.config) if getattr(args, "config", None) else TrainConfig()
    overrides = parse_overrides(getattr(args, "set", None) or [])
    return cfg.replace(**overrides) if overrides else cfg


def _volume_source(args):
    from .volume_io import PhantomSpec, generate_phantom, load_volume

    if args.volume:
        return load_volume(args.volume)
    if args.phantom_seed is not None:
        return generate_phantom(PhantomSpec(dims=args.dims, seed=args.phantom_seed))
    raise DataError("no volume source: give --volume or --phantom-seed")


def _image_paths(folder) -> list[Path]:
    folder = Path(folder)
    if not folder.is_dir():
        raise DataError(f"image folder {folder} does not exist")
    paths = sorted(p for p in folder.iterdir() if p.suffix.lower() in (".pgm", ".rvol"))
    if not paths:
        raise DataError(f"no .pgm or .rvol images in {folder}")
    return paths


def _load_stack(folder):
    from .volume_io import load_image

    return [load_image(p) for p in _image_paths(folder)]


# --------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    from .bench import simulate_stack
    from .geometry import axial_stack_poses, perturb_poses, rotated_coronal_poses, write_pose_table
    from .volume_io import save_image, save_volume

    vol = _volume_source(args)
    out = Path(args.out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    true = axial_stack_poses(args.n) if args.sweep == "axial" else rotated_coronal_poses(args.n)
    h, w, _ = vol.dims
    stack = simulate_stack(vol, true, h, w)
    suffix = ".pgm" if args.format == "pgm" else ".rvol"
    for k, img in enumerate(stack):
        save_image(img, out / "images" / f"slice_{k:04d}{suffix}")
    save_volume(vol, out / "volume.rvol")
    if args.noise > 0:
        noisy = perturb_poses(true, args.noise, args.noise_seed, vol.shape_xyz)
        write_pose_table(out / "poses.txt", noisy, f"{args.sweep} sweep with U(-{args.noise}, {args.noise}) noise")
        write_pose_table(out / "true_poses.txt", true, f"{args.sweep} sweep, ground truth")
    else:
        write_pose_table(out / "poses.txt", true, f"{args.sweep} sweep")
    _write_resolved(out / "simulate.cfg", _args_dict(args))
    print(f"wrote {len(stack)} images and poses to {out}")
    return 0


def cmd_reconstruct(args) -> int:
    from .checkpoint import save_checkpoint
    from .geometry import read_pose_table, write_pose_table
    from .trainer import reconstruct
    from .volume_io import load_volume

    cfg = _load_config(args)
    stack = _load_stack(args.images)
    poses = read_pose_table(args.poses)
    if len(stack) != len(poses):
        raise DataError(f"{len(stack)} images but {len(poses)} poses")
    if args.learn_poses:
        cfg = cfg.replace(learn_poses=True)
    vol = load_volume(args.eval_volume) if args.eval_volume else None
    true = read_pose_table(args.true_poses) if args.true_poses else None
    ckpt = Path(args.out)
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    cfg.save(ckpt.with_suffix(".cfg"))
    res = reconstruct(stack, poses, cfg, eval_volume=vol, true_poses=true, checkpoint_path=ckpt)
    save_checkpoint(res.model, ckpt)
    res.report.to_csv(ckpt.with_suffix(".report.csv"))
    if cfg.learn_poses:
        write_pose_table(ckpt.with_suffix(".poses.txt"), res.poses, "refined poses")
    print(f"checkpoint {ckpt}; report {ckpt.with_suffix('.report.csv')}")
    return 0


def cmd_render(args) -> int:
    from .checkpoint import load_checkpoint
    from .model import render_slice
    from .volume_io import save_image

    model = load_checkpoint(args.ckpt)
    rows, cols = args.size
    img = render_slice(model, args.pose, rows, cols, args.extent)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_image(img, out)
    _write_resolved(out.with_suffix(".cfg"), {**_args_dict(args), "pose": ",".join(map(repr, args.pose.as_vector()))})
    return 0


def cmd_evaluate(args) -> int:
    from .bench import EvalSpec, ViewSet, format_accuracy_table
    from .checkpoint import load_checkpoint
    from .geometry import read_pose_table
    from .volume_io import load_volume

    model = load_checkpoint(args.ckpt)
    vol = load_volume(args.volume)
    train = read_pose_table(args.train_poses) if args.train_poses else None
    spec = EvalSpec(tuple(args.families), args.n, extent=args.extent)
    res = ViewSet(vol, spec, train).evaluate(model)
    table = format_accuracy_table([(args.label, model.representation, res)], spec.families)
    print(table)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "accuracy.txt").write_text(table + "\n")
    with open(out / "accuracy.csv", "w") as fh:
        fh.write("family,mean_neg_ssim,std\n")
        for fam, (m, s) in res.items():
            fh.write(f"{fam},{m!r},{s!r}\n")
    _write_resolved(out / "evaluate.cfg", _args_dict(args))
    return 0


def cmd_ablate(args) -> int:
    from .ablation import ABLATION_COLUMNS, ablation_sweep
    from .bench import EvalSpec
    from .decoder import ABLATION_NETWORKS
    from .geometry import read_pose_table
    from .volume_io import load_volume

    cfg = _load_config(args)
    stack = _load_stack(args.images)
    poses = read_pose_table(args.poses)
    if len(stack) != len(poses):
        raise DataError(f"{len(stack)} images but {len(poses)} poses")
    vol = load_volume(args.volume)
    networks = ABLATION_NETWORKS
    if args.networks:
        networks = [tuple(int(v) for v in s.split("-")) for s in args.networks]
    columns = [c for c in ABLATION_COLUMNS if not args.columns or c[0] in args.columns]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "ablate.cfg")
    rows, cols = np.asarray(stack[0].pixels).shape
    spec = EvalSpec(("coronal",), args.n or cfg.eval_n, rows, cols, cfg.extent)
    table = ablation_sweep(stack, poses, vol, networks, columns, tuple(args.decompositions), cfg, spec)
    text = table.format()
    print(text)
    (out / "ablation.txt").write_text(text + "\n")
    table.to_csv(out / "ablation.csv")
    return 0


def cmd_bench(args) -> int:
    from .bench import EvalSpec, speed_ratio, timing_profile, write_curves, write_curves_csv
    from .config import TrainConfig
    from .geometry import read_pose_table
    from .volume_io import load_volume

    stack = _load_stack(args.images)
    poses = read_pose_table(args.poses)
    if len(stack) != len(poses):
        raise DataError(f"{len(stack)} images but {len(poses)} poses")
    vol = load_volume(args.volume)
    configs = [(Path(p).stem, TrainConfig.load(p)) for p in args.configs]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for label, cfg in configs:
        cfg.save(out / f"{label}.cfg")
    rows, cols = np.asarray(stack[0].pixels).shape
    spec = EvalSpec(tuple(args.families), args.n, rows, cols)
    curves = timing_profile(configs, stack, poses, args.budget, vol, spec)
    write_curves(curves, out / "curves.dat")
    write_curves_csv(curves, out / "curves.csv")
    base = curves[0]
    summary = {c.label: {"seconds_per_epoch": c.seconds_per_epoch, "truncated": c.truncated,
                         "slowdown_vs_first": speed_ratio(c, base)} for c in curves}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    for label, s in summary.items():
        print(f"{label:20s} {s['seconds_per_epoch'] * 1e3:9.2f} ms/epoch  x{s['slowdown_vs_first']:.2f}"
              + ("  (truncated)" if s["truncated"] else ""))
    return 0


def cmd_atlas_fit(args) -> int:
    from .atlas import init_from_atlas

    cfg = _load_config(args)
    vol = _volume_source(args)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    cfg.save(out.with_suffix(".cfg"))
    init_from_atlas(vol, None, args.rank or cfg.rank, args.channels or cfg.channels, cfg,
                    max_epochs=args.max_epochs, checkpoint_path=out)
    print(f"atlas checkpoint {out}")
    return 0


# --------------------------------------------------------------------------
# parser


def _add_volume_source(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--volume", help="RVOL volume file")
    src.add_argument("--phantom-seed", type=int, help="generate a synthetic phantom with this seed")
    p.add_argument("--dims", type=_dims_arg, default=(64, 64, 64), help="phantom size HxWxD (default 64x64x64)")


def _add_config(p):
    p.add_argument("--config", help="key = value run configuration file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="trivol", description="Factorized slice-to-volume reconstruction.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample posed slices from a volume")
    _add_volume_source(p)
    p.add_argument("--sweep", choices=("axial", "coronal360"), default="axial")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--noise", type=float, default=0.0, help="U(-h, h) pose noise: degrees and voxels")
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--format", choices=("pgm", "rvol"), default="pgm")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="fit a field to posed images")
    p.add_argument("--images", required=True)
    p.add_argument("--poses", required=True)
    _add_config(p)
    p.add_argument("--learn-poses", action="store_true")
    p.add_argument("--eval-volume", help="ground-truth volume for held-out scoring")
    p.add_argument("--true-poses", help="ground-truth pose table for pose-error tracking")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("render", help="render one slice from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--pose", type=_pose_arg, required=True,
                   help='"e1,e2,e3,t1,t2,t3": Z-Y-X angles in degrees, then translation in [-1, 1] units')
    p.add_argument("--size", type=_size_arg, default=(64, 64), help="ROWSxCOLS")
    p.add_argument("--extent", type=float, default=1.0)
    p.add_argument("--out", required=True, help="image path (.pgm or .rvol)")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("evaluate", help="score held-out views against a volume")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--volume", required=True)
    p.add_argument("--families", nargs="+", default=["axial", "coronal", "sagittal"],
                   choices=("axial", "coronal", "sagittal"))
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--extent", type=float, default=1.0)
    p.add_argument("--train-poses", help="training pose table; overlapping test views are an error")
    p.add_argument("--label", default="-")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="sweep networks, encodings and decompositions")
    p.add_argument("--images", required=True)
    p.add_argument("--poses", required=True)
    p.add_argument("--volume", required=True)
    _add_config(p)
    p.add_argument("--networks", nargs="*", metavar="N-W", help="e.g. 2-64 3-128 (default: full grid)")
    p.add_argument("--columns", nargs="*", help="subset of encoding columns, e.g. L=2+input")
    p.add_argument("--decompositions", nargs="+", default=["triplanar", "cp"], choices=("triplanar", "cp"))
    p.add_argument("--n", type=int, default=0, help="coronal test views (default: config eval_n)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench", help="accuracy-vs-time curves for several configs")
    p.add_argument("--images", required=True)
    p.add_argument("--poses", required=True)
    p.add_argument("--volume", required=True)
    p.add_argument("--configs", nargs="+", required=True, help="two or more config files")
    p.add_argument("--budget", type=float, default=0.0, help="training seconds per config (0: none)")
    p.add_argument("--families", nargs="+", default=["coronal"], choices=("axial", "coronal", "sagittal"))
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("atlas-fit", help="fit a reusable atlas checkpoint")
    _add_volume_source(p)
    _add_config(p)
    p.add_argument("--rank", type=int)
    p.add_argument("--channels", type=int)
    p.add_argument("--max-epochs", type=int, default=400)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=cmd_atlas_fit)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FitFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
