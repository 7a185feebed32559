import math

import numpy as np
import pytest

from trivol.bench import simulate_stack
from trivol.config import TrainConfig
from trivol.errors import DataError, NumericalError
from trivol.geometry import axial_stack_poses, pose_errors
from trivol.trainer import RunReport, default_resolution, reconstruct, reconstruct_with_noisy_poses
from trivol.volume_io import Image2D

# 6 interior test offsets never coincide with a 16-slice lattice
FAST = TrainConfig(epochs=3, eval_every=1, eval_n=6)


@pytest.fixture(scope="module")
def small_data(small_phantom):
    poses = axial_stack_poses(16)
    return small_phantom, simulate_stack(small_phantom, poses), poses


def test_default_resolution():
    assert default_resolution(64, 64) == (32, 32, 32)
    assert default_resolution(9, 20) == (10, 5, 10)
    assert default_resolution(2, 2) == (2, 2, 2)


def test_same_seed_same_trace(small_data):
    vol, stack, poses = small_data
    a = reconstruct(stack, poses, FAST, eval_volume=vol)
    b = reconstruct(stack, poses, FAST, eval_volume=vol)
    assert a.report.trace() == b.report.trace()
    for k, v in a.field.params().items():
        assert np.array_equal(v, b.field.params()[k])
    c = reconstruct(stack, poses, FAST.replace(seed=1), eval_volume=vol)
    assert c.report.trace() != a.report.trace()


def test_report_epochs_and_columns(small_data, tmp_path):
    vol, stack, poses = small_data
    res = reconstruct(stack, poses, FAST.replace(eval_families=("axial", "coronal")), eval_volume=vol)
    ep = res.report.column("epoch")
    assert ep == [0, 1, 2, 3]
    assert math.isnan(res.report.rows[0]["train_loss"])
    assert all(math.isnan(r["test_sagittal"]) for r in res.report.rows)
    p = tmp_path / "r.csv"
    res.report.to_csv(p)
    back = RunReport.read_csv(p)
    assert back.metadata["representation"] == "triplanar"
    np.testing.assert_array_equal(np.array(back.trace(), float), np.array(res.report.trace(), float))
    with pytest.raises(ValueError):
        res.report.add(epoch=3)


def test_training_lowers_loss(small_data):
    vol, stack, poses = small_data
    res = reconstruct(stack, poses, TrainConfig(epochs=20, eval_every=10, eval_n=8), eval_volume=vol)
    tl = res.report.column("train_loss")
    assert tl[-1] < tl[1]
    co = res.report.column("test_coronal")
    assert co[-1] < co[0]


def test_constant_target_recovered():
    stack = [Image2D(np.full((16, 16), 0.5)) for _ in range(8)]
    poses = axial_stack_poses(8)
    res = reconstruct(stack, poses, TrainConfig(epochs=100, eval_every=100))
    assert res.report.rows[-1]["train_loss"] <= -0.99
    y = res.model.forward(np.random.default_rng(0).uniform(-1, 1, (200, 3)))[0]
    assert np.abs(y - 0.5).max() < 0.05


def test_count_mismatch(small_data):
    _, stack, poses = small_data
    with pytest.raises(DataError, match="16 images but 15 poses"):
        reconstruct(stack, poses[:15], FAST)


def test_nan_reports_epoch_and_slice(small_data):
    _, stack, poses = small_data
    bad = list(stack)
    bad[5] = Image2D(np.where(np.eye(16, dtype=bool), np.nan, 0.5))
    with pytest.raises(NumericalError) as info:
        reconstruct(bad, poses, TrainConfig(epochs=2, eval_every=1))
    assert info.value.epoch == 1 and info.value.slice_index == 5


def test_zero_noise_matches_plain_run(small_data):
    vol, stack, poses = small_data
    cfg = FAST.replace(learn_poses=True)
    a = reconstruct_with_noisy_poses(stack, poses, 0.0, cfg, eval_volume=vol)
    b = reconstruct(stack, poses, cfg, eval_volume=vol, true_poses=poses)
    assert a.report.trace() == b.report.trace()


def test_pose_learning_moves_poses(small_data):
    vol, stack, poses = small_data
    res = reconstruct_with_noisy_poses(stack, poses, 2.0, FAST.replace(learn_poses=True), eval_volume=vol,
                                       noise_seed=4)
    deg = res.report.column("pose_err_deg")
    assert deg[0] > 0 and deg[-1] != deg[0]
    assert pose_errors(res.poses, poses)[0] == pytest.approx(deg[-1])


def test_target_ssim_stops_early(small_data):
    vol, stack, poses = small_data
    res = reconstruct(stack, poses, FAST.replace(epochs=50, target_ssim=0.01), eval_volume=vol)
    assert res.report.rows[-1]["epoch"] <= 1


def test_implicit_runs(small_data):
    vol, stack, poses = small_data
    cfg = FAST.replace(representation="implicit", implicit_layers=2, implicit_width=16, implicit_degree=3, epochs=2)
    res = reconstruct(stack, poses, cfg, eval_volume=vol)
    assert res.field is None
    assert res.report.metadata["representation"] == "implicit"
