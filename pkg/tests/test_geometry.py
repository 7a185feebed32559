import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_difference, rel_err, rotation_literal
from trivol.errors import DataError
from trivol.geometry import (
    Pose,
    axial_stack_poses,
    family_poses,
    parse_pose,
    perturb_poses,
    pose_errors,
    pose_grid_backward,
    pose_to_grid,
    read_pose_table,
    rotated_coronal_poses,
    rotation_matrix,
    write_pose_table,
)

angles = st.floats(-360, 360, allow_nan=False)


def test_identity_grid():
    g = pose_to_grid(Pose.identity(), 5, 7)
    assert g.coords.shape == (35, 3)
    assert np.all(g.coords[:, 2] == 0)
    corners = g.coords[[0, 6, 28, 34], :2]
    assert np.allclose(corners, [[-1, -1], [1, -1], [-1, 1], [1, 1]])


def test_row_major_layout():
    c = pose_to_grid(Pose.identity(), 3, 4).coords.reshape(3, 4, 3)
    assert np.all(np.diff(c[:, :, 0], axis=1) > 0)  # x across columns
    assert np.all(np.diff(c[:, :, 1], axis=0) > 0)  # y down rows


def test_quarter_turn_about_z():
    assert np.allclose(rotation_matrix([90, 0, 0]) @ [1, 0, 0], [0, 1, 0], atol=1e-12)


def test_pure_translation():
    g = pose_to_grid(Pose(np.zeros(3), [0, 0, 0.5]), 4, 4)
    assert np.allclose(g.coords[:, 2], 0.5)


@settings(max_examples=50, deadline=None)
@given(angles, angles, angles)
def test_rotation_matches_elementary_product(a, b, c):
    r = rotation_matrix([a, b, c])
    assert np.allclose(r, rotation_literal([a, b, c]), atol=1e-12)
    assert np.allclose(r @ r.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(r) == pytest.approx(1.0)


def test_grid_argument_checks():
    with pytest.raises(DataError):
        pose_to_grid(Pose(np.array([np.nan, 0, 0]), np.zeros(3)), 4, 4)
    with pytest.raises(DataError):
        pose_to_grid(Pose.identity(), 1, 4)
    with pytest.raises(DataError):
        pose_to_grid(Pose.identity(), 4, 4, extent=1.5)


def test_axial_stack_offsets():
    assert [p.trans[2] for p in axial_stack_poses(2)] == [-1, 1]
    assert np.allclose([p.trans[2] for p in axial_stack_poses(3)], [-1, 0, 1])
    z = np.array([p.trans[2] for p in axial_stack_poses(128)])
    assert len(z) == 128 and np.allclose(np.diff(z), 2 / 127)
    with pytest.raises(DataError):
        axial_stack_poses(1)


def test_coronal_sweep_angles_and_geometry():
    poses = rotated_coronal_poses(4)
    assert [p.euler[0] for p in poses] == [0, 90, 180, 270]
    assert np.allclose(rotated_coronal_poses(128)[1].euler[0], 2.8125)
    g0 = pose_to_grid(poses[0], 9, 9).coords
    assert np.allclose(g0[:, 1], 0, atol=1e-12)  # lies in the y-normal plane through the origin
    for p in rotated_coronal_poses(16):
        c = pose_to_grid(p, 9, 9).coords.reshape(9, 9, 3)[:, 4]
        # the centre column is the vertical (z) axis
        assert np.allclose(c[:, :2], 0, atol=1e-12)
        assert np.allclose(c[:, 2], np.linspace(-1, 1, 9))
    with pytest.raises(DataError):
        rotated_coronal_poses(1)


def test_family_views_are_interior_and_orthogonal():
    for fam, axis in (("axial", 2), ("coronal", 1), ("sagittal", 0)):
        poses = family_poses(fam, 5)
        for p in poses:
            c = pose_to_grid(p, 6, 6).coords
            assert np.ptp(c[:, axis]) < 1e-12
            assert -1 < c[0, axis] < 1
    with pytest.raises(ValueError):
        family_poses("oblique", 3)


def test_perturbation_bounds_and_determinism():
    base = axial_stack_poses(1000)
    dims = (64, 32, 16)
    noisy = perturb_poses(base, 3.0, seed=11, dims_xyz=dims)
    again = perturb_poses(base, 3.0, seed=11, dims_xyz=dims)
    a = np.array([p.as_vector() for p in noisy])
    b = np.array([p.as_vector() for p in base])
    assert np.array_equal(a, np.array([p.as_vector() for p in again]))
    assert np.all(np.abs(a[:, :3] - b[:, :3]) <= 3)
    vox = (a[:, 3:] - b[:, 3:]) / (2 / (np.array(dims) - 1))
    assert np.all(np.abs(vox) <= 3 + 1e-9)
    assert np.abs(vox).max() > 2.9
    assert np.array_equal(np.array([p.as_vector() for p in perturb_poses(base, 0, 1)]), b)


def test_pose_errors():
    a = [Pose([1, 2, 3], [0, 0, 0])]
    b = [Pose([0, 0, 0], [2 / 63, 0, 0])]
    deg, norm, vox = pose_errors(a, b, (64, 64, 64))
    assert deg == pytest.approx(2.0)
    assert norm == pytest.approx(2 / 63 / 3)
    assert vox == pytest.approx(1 / 3)


def test_pose_backward_finite_differences(rng):
    for _ in range(5):
        pose = Pose(rng.uniform(-180, 180, 3), rng.uniform(-0.3, 0.3, 3))
        g = rng.normal(size=(12, 3))

        def f(v):
            p = Pose(np.rad2deg(v[:3]), v[3:])
            return float(np.sum(pose_to_grid(p, 3, 4).coords * g))

        d_ang, d_tr = pose_grid_backward(pose, 3, 4, g)
        v0 = np.concatenate([np.deg2rad(pose.euler), pose.trans])
        fd = central_difference(f, v0, 1e-6)
        assert rel_err(np.concatenate([d_ang, d_tr]), fd) < 1e-7


def test_parse_pose():
    assert np.allclose(parse_pose("1, 2 3,4,5 ,6").as_vector(), [1, 2, 3, 4, 5, 6])
    for bad in ("1,2", "a,b,c,d,e,f", "1,2,3,4,5,nan"):
        with pytest.raises(DataError):
            parse_pose(bad)


def test_pose_table_round_trip(tmp_path):
    poses = perturb_poses(rotated_coronal_poses(7), 2.5, 3)
    path = tmp_path / "poses.txt"
    write_pose_table(path, poses, "a comment")
    back = read_pose_table(path)
    assert all(np.array_equal(a.as_vector(), b.as_vector()) for a, b in zip(poses, back))
