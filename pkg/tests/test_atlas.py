import numpy as np
import pytest

from trivol.atlas import init_from_atlas, lattice_poses
from trivol.checkpoint import load_checkpoint
from trivol.config import TrainConfig
from trivol.errors import ConfigError, FitFailureError
from trivol.geometry import Pose
from trivol.model import render_slice
from trivol.volume_io import PhantomSpec, generate_phantom


def test_lattice_covers_three_families(small_phantom):
    poses = lattice_poses(small_phantom)
    assert len(poses) == 48
    assert np.allclose(poses[0].trans, [0, 0, -1]) and np.allclose(poses[-1].euler, [90, 0, 90])


def test_constant_atlas_and_reload(tmp_path):
    vol = generate_phantom(PhantomSpec(dims=(16, 16, 16), n_ellipsoids=0, texture_freq=0))
    assert np.all(vol.voxels == 0.5)
    p = tmp_path / "atlas.rfld"
    model = init_from_atlas(vol, config=TrainConfig(eval_n=4), max_epochs=60, checkpoint_path=p)
    pose = Pose([12, 0, 40], [0.1, 0, 0])
    img = render_slice(model, pose, 20, 20).pixels
    assert np.abs(img - 0.5).max() < 0.01
    assert np.array_equal(render_slice(load_checkpoint(p), pose, 20, 20).pixels, img)
    assert model.field.resolution == (8, 8, 8)


def test_failure_and_kind_checks(small_phantom):
    with pytest.raises(FitFailureError):
        init_from_atlas(small_phantom, rank=1, channels=1, max_epochs=0, config=TrainConfig(eval_n=4))
    with pytest.raises(ConfigError):
        init_from_atlas(small_phantom, config=TrainConfig(representation="cp"))
