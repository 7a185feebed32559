"""Run configuration and its flat ``key = value`` file form."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .encoding import EncodingConfig
from .errors import ConfigError

REPRESENTATIONS = ("triplanar", "cp", "implicit")


@dataclass
class TrainConfig:
    representation: str = "triplanar"
    rank: int = 5
    channels: int = 10
    combiner: str = "product"
    encode_degree: int = 2
    encode_include_raw: bool = True
    mlp_layers: int = 2
    mlp_width: int = 64
    epochs: int = 5000
    batch_slices: int = 1
    lr_field: float = 0.5
    lr_decoder: float = 0.001
    lr_pose: float = 0.001
    learn_poses: bool = False
    seed: int = 0
    eval_every: int = 250
    init: str = "random"
    # (I, J, K) along x, y, z; empty means half the slice size per axis
    resolution: tuple = ()
    extent: float = 1.0
    implicit_degree: int = 10
    implicit_layers: int = 6
    implicit_width: int = 128
    lr_implicit: float = 0.001
    eval_families: tuple = ("coronal",)
    eval_n: int = 64
    # stop once every eval family reaches this SSIM; 0 disables
    target_ssim: float = 0.0
    # wall-clock cap on training seconds; 0 disables
    time_budget: float = 0.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.representation not in REPRESENTATIONS:
            raise ConfigError(f"representation must be one of {REPRESENTATIONS}, got {self.representation!r}")
        if self.combiner not in ("product", "sum"):
            raise ConfigError(f"combiner must be product or sum, got {self.combiner!r}")
        if self.rank < 1 or self.channels < 1:
            raise ConfigError("rank and channels must be >= 1")
        if self.epochs < 0 or self.batch_slices < 1 or self.eval_every < 1:
            raise ConfigError("epochs >= 0, batch_slices >= 1 and eval_every >= 1 required")
        if not (self.init == "random" or self.init.startswith("atlas:")):
            raise ConfigError(f"init must be 'random' or 'atlas:<path>', got {self.init!r}")
        if self.resolution and (len(self.resolution) != 3 or min(self.resolution) < 2):
            raise ConfigError(f"resolution needs three sizes >= 2, got {self.resolution}")
        self.encoding  # raises on an empty encoding

    @property
    def encoding(self) -> EncodingConfig:
        return EncodingConfig(self.encode_degree, self.encode_include_raw)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    # ---- key = value form

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, tuple):
                s = ",".join(str(x) for x in v)
            else:
                s = repr(v) if isinstance(v, float) else str(v)
            lines.append(f"{f.name} = {s}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "TrainConfig":
        return cls(**parse_overrides(text.splitlines()))

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_text(Path(path).read_text())


_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}


def _coerce(name: str, raw: str):
    default = _FIELDS[name].default
    raw = raw.strip()
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    if isinstance(default, tuple):
        items = [x.strip() for x in raw.split(",") if x.strip()]
        if name == "resolution":
            return tuple(int(x) for x in items)
        return tuple(items)
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from exc
    return raw


def parse_overrides(lines) -> dict:
    """Parse ``key = value`` lines ('#' comments allowed); unknown keys are rejected."""
    out = {}
    for ln in lines:
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        if "=" not in ln:
            raise ConfigError(f"expected key = value, got {ln!r}")
        key, value = (s.strip() for s in ln.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = _coerce(key, value)
    return out
