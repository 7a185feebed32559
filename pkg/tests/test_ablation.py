import math

import numpy as np

from trivol.ablation import ABLATION_COLUMNS, AblationCell, AblationTable, ablation_sweep
from trivol.bench import EvalSpec, simulate_stack
from trivol.config import TrainConfig
from trivol.geometry import axial_stack_poses
from trivol.volume_io import Image2D


def test_two_cell_sweep(small_phantom):
    poses = axial_stack_poses(16)
    stack = simulate_stack(small_phantom, poses)
    seen = []
    table = ablation_sweep(stack, poses, small_phantom, networks=[(2, 16)], columns=ABLATION_COLUMNS[:1],
                           config=TrainConfig(epochs=2, eval_every=2), eval_spec=EvalSpec(("coronal",), 4),
                           on_cell=seen.append)
    assert len(table.cells) == 2 == len(seen)
    assert table.rows() == [("triplanar", (2, 16)), ("cp", (2, 16))]
    assert all(math.isfinite(c.value) and c.value < 0 for c in table.cells)


def test_diverged_cell_recorded_as_nan(small_phantom):
    poses = axial_stack_poses(4)
    stack = [Image2D(np.full((12, 12), np.nan)) for _ in poses]
    table = ablation_sweep(stack, poses, small_phantom, networks=[(2, 8)], columns=ABLATION_COLUMNS[:2],
                           decompositions=("triplanar",), config=TrainConfig(epochs=1),
                           eval_spec=EvalSpec(("coronal",), 2))
    assert len(table.cells) == 2
    assert all(math.isnan(c.value) and "non-finite" in c.error for c in table.cells)
    assert "NaN" in table.format()


def test_format_marks_best(tmp_path):
    t = AblationTable([AblationCell("triplanar", (2, 64), "L=0", -0.8),
                       AblationCell("triplanar", (2, 64), "L=2", -0.9)], columns=("L=0", "L=2"))
    row = t.format().splitlines()[2]
    assert "-0.9000*" in row and "-0.8000*" not in row
    assert t.best("triplanar") == -0.9 and math.isnan(t.best("cp"))
    t.to_csv(tmp_path / "a.csv")
    assert (tmp_path / "a.csv").read_text().splitlines()[1] == "triplanar,MLP 2-64,L=0,-0.8,"
