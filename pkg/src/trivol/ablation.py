"""Architecture sweep: decoder networks x encoding settings x decompositions."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .bench import EvalSpec
from .config import TrainConfig
from .decoder import ABLATION_NETWORKS
from .encoding import EncodingConfig
from .errors import NumericalError
from .trainer import reconstruct

log = logging.getLogger(__name__)

# (column label, encoding); the L=0 column keeps the raw feature so the decoder has an input
ABLATION_COLUMNS = (
    ("L=0", EncodingConfig(0, True)),
    ("L=2", EncodingConfig(2, False)),
    ("L=5", EncodingConfig(5, False)),
    ("L=10", EncodingConfig(10, False)),
    ("L=2+input", EncodingConfig(2, True)),
    ("L=5+input", EncodingConfig(5, True)),
    ("L=10+input", EncodingConfig(10, True)),
)
DECOMPOSITIONS = ("triplanar", "cp")


@dataclass
class AblationCell:
    decomposition: str
    network: tuple[int, int]
    column: str
    value: float  # final held-out -SSIM, NaN if the run diverged
    error: str | None = None

    @property
    def network_name(self) -> str:
        return f"MLP {self.network[0]}-{self.network[1]}"


@dataclass
class AblationTable:
    cells: list[AblationCell] = field(default_factory=list)
    columns: tuple[str, ...] = tuple(c for c, _ in ABLATION_COLUMNS)

    def get(self, decomposition: str, network, column: str) -> float:
        for c in self.cells:
            if (c.decomposition, tuple(c.network), c.column) == (decomposition, tuple(network), column):
                return c.value
        raise KeyError((decomposition, network, column))

    def rows(self) -> list[tuple[str, tuple[int, int]]]:
        seen = []
        for c in self.cells:
            key = (c.decomposition, tuple(c.network))
            if key not in seen:
                seen.append(key)
        return seen

    def best(self, decomposition: str) -> float:
        vals = [c.value for c in self.cells if c.decomposition == decomposition and math.isfinite(c.value)]
        return min(vals) if vals else math.nan

    def format(self) -> str:
        """Text table, one row per (decomposition, network); best cell per row marked with '*'."""
        header = ["Decomposition", "Network", *self.columns]
        body = []
        for dec, net in self.rows():
            vals = {c.column: c.value for c in self.cells if c.decomposition == dec and tuple(c.network) == net}
            finite = [v for v in vals.values() if math.isfinite(v)]
            top = min(finite) if finite else None
            cells = []
            for col in self.columns:
                v = vals.get(col)
                if v is None:
                    cells.append("")
                elif not math.isfinite(v):
                    cells.append("NaN")
                else:
                    cells.append(f"{v:.4f}" + ("*" if v == top else ""))
            body.append([dec, f"MLP {net[0]}-{net[1]}", *cells])
        widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in [header, *body]]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["decomposition", "network", "column", "neg_ssim", "error"])
            for c in self.cells:
                wr.writerow([c.decomposition, c.network_name, c.column,
                             "NaN" if not math.isfinite(c.value) else repr(c.value), c.error or ""])


def ablation_sweep(stack, poses, eval_volume, networks=ABLATION_NETWORKS, columns=ABLATION_COLUMNS,
                   decompositions=DECOMPOSITIONS, config: TrainConfig | None = None,
                   eval_spec: EvalSpec | None = None, on_cell=None) -> AblationTable:
    """Train every cell with the same seed and data; record final held-out coronal -SSIM.

    A cell whose loss goes non-finite is recorded as NaN and the sweep moves on.
    """
    base = config or TrainConfig()
    table = AblationTable(columns=tuple(c for c, _ in columns))
    for dec in decompositions:
        for n_layers, width in networks:
            for label, enc in columns:
                cfg = base.replace(
                    representation=dec, mlp_layers=n_layers, mlp_width=width,
                    encode_degree=enc.degree, encode_include_raw=enc.include_raw,
                )
                err = None
                try:
                    # divergence is detected by the trainer and recorded below
                    with np.errstate(over="ignore", invalid="ignore"):
                        res = reconstruct(stack, poses, cfg, eval_volume=eval_volume, eval_spec=eval_spec)
                    fam = (eval_spec.families if eval_spec else cfg.eval_families)[0]
                    value = float(res.report.final(fam))
                except (NumericalError, FloatingPointError) as exc:
                    value, err = math.nan, str(exc)
                cell = AblationCell(dec, (n_layers, width), label, value, err)
                log.info("%s %s %s -> %s", dec, cell.network_name, label, value)
                table.cells.append(cell)
                if on_cell is not None:
                    on_cell(cell)
    return table
