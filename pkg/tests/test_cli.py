import numpy as np
import pytest

from trivol.cli import main
from trivol.config import TrainConfig
from trivol.geometry import read_pose_table
from trivol.volume_io import load_image


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--phantom-seed", "2", "--dims", "16x16x16", "--n", "16", "--out", str(out)]) == 0
    return out


def test_simulate_outputs(sim):
    assert len(list((sim / "images").glob("*.pgm"))) == 16
    assert len(read_pose_table(sim / "poses.txt")) == 16
    assert (sim / "volume.rvol").exists() and (sim / "simulate.cfg").exists()


def test_coronal_sweep_step(tmp_path):
    assert main(["simulate", "--phantom-seed", "0", "--dims", "8x8x8", "--sweep", "coronal360",
                 "--n", "128", "--out", str(tmp_path)]) == 0
    poses = read_pose_table(tmp_path / "poses.txt")
    steps = np.diff([p.euler[0] for p in poses])
    assert len(poses) == 128 and np.allclose(steps, 2.8125)


def test_noise_bound(tmp_path):
    assert main(["simulate", "--phantom-seed", "0", "--dims", "8x8x8", "--n", "8", "--noise", "3",
                 "--out", str(tmp_path)]) == 0
    noisy = np.array([p.as_vector() for p in read_pose_table(tmp_path / "poses.txt")])
    true = np.array([p.as_vector() for p in read_pose_table(tmp_path / "true_poses.txt")])
    assert np.abs(noisy[:, :3] - true[:, :3]).max() <= 3.0
    assert np.abs(noisy[:, 3:] - true[:, 3:]).max() <= 3.0 * 2 / 7 + 1e-12
    assert np.abs(noisy - true).max() > 0


def test_reconstruct_then_render(sim, tmp_path):
    ckpt = tmp_path / "run" / "model.rfld"
    rc = main(["reconstruct", "--images", str(sim / "images"), "--poses", str(sim / "poses.txt"),
               "--eval-volume", str(sim / "volume.rvol"), "--set", "epochs=2", "--set", "eval_n=4",
               "--out", str(ckpt)])
    assert rc == 0
    assert ckpt.read_bytes()[:8] == b"RFLDv001"
    resolved = TrainConfig.load(ckpt.with_suffix(".cfg"))
    assert resolved.epochs == 2 and resolved.rank == 5
    assert ckpt.with_suffix(".report.csv").exists()
    img = tmp_path / "view.pgm"
    assert main(["render", "--ckpt", str(ckpt), "--pose", "0,0,90,0,0.1,0", "--size", "256x256",
                 "--out", str(img)]) == 0
    assert load_image(img).pixels.shape == (256, 256)
    assert img.with_suffix(".cfg").exists()
    out = tmp_path / "eval"
    assert main(["evaluate", "--ckpt", str(ckpt), "--volume", str(sim / "volume.rvol"), "--n", "4",
                 "--out", str(out)]) == 0
    assert "Coronal" in (out / "accuracy.txt").read_text()


def test_malformed_pose_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["render", "--ckpt", "x.rfld", "--pose", "1,2,3", "--out", str(tmp_path / "a.pgm")])
    assert info.value.code == 2


def test_count_mismatch_exit_code(sim, tmp_path):
    short = tmp_path / "short.txt"
    short.write_text("\n".join((sim / "poses.txt").read_text().splitlines()[:-1]) + "\n")
    rc = main(["reconstruct", "--images", str(sim / "images"), "--poses", str(short), "--out",
               str(tmp_path / "m.rfld")])
    assert rc == 3


def test_missing_file_exit_code(tmp_path):
    rc = main(["render", "--ckpt", str(tmp_path / "none.rfld"), "--pose", "0,0,0,0,0,0",
               "--out", str(tmp_path / "a.pgm")])
    assert rc == 3
