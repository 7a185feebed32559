import numpy as np
import pytest
from skimage.metrics import structural_similarity

from oracles import central_difference, rel_err, ssim_brute_force
from trivol.errors import DataError
from trivol.loss import filter_matrix, ssim, ssim_map, ssim_with_grad, training_loss, training_loss_with_grad


def test_identical_images_score_one(rng):
    a = rng.random((20, 24))
    assert ssim(a, a) == pytest.approx(1.0)
    assert training_loss(a, a) == pytest.approx(-1.0)


def test_symmetric(rng):
    a, b = rng.random((16, 16)), rng.random((16, 16))
    assert ssim(a, b) == pytest.approx(ssim(b, a))


def test_matches_window_by_window_oracle(rng):
    a = rng.random((13, 15))
    b = np.clip(a + rng.normal(scale=0.2, size=a.shape), 0, 1)
    assert ssim(a, b) == pytest.approx(ssim_brute_force(a, b), abs=1e-10)


def test_matches_scikit_image(rng):
    a = rng.random((32, 40))
    b = np.clip(0.7 * a + 0.2 * rng.random(a.shape), 0, 1)
    _, full = structural_similarity(a, b, gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
                                    data_range=1.0, full=True)
    assert np.allclose(ssim_map(a, b), full, atol=1e-10)


def test_filter_rows_sum_to_one():
    m = filter_matrix(12, 11, 1.5)
    assert np.allclose(m.sum(axis=1), 1.0)


def test_size_and_shape_checks(rng):
    with pytest.raises(DataError):
        ssim(rng.random((8, 8)), rng.random((8, 9)))
    with pytest.raises(DataError):
        ssim(rng.random((8, 8)), rng.random((8, 8)))


def test_gradient_finite_differences(rng):
    a = rng.random((12, 14))
    b = rng.random((12, 14))
    val, g = ssim_with_grad(a, b)
    assert val == pytest.approx(ssim(a, b))
    fd = central_difference(lambda x: ssim(x, b), a, 1e-6)
    assert rel_err(g, fd) < 1e-6


def test_loss_gradient_is_negated(rng):
    a, b = rng.random((12, 12)), rng.random((12, 12))
    loss, g = training_loss_with_grad(a, b)
    assert loss == pytest.approx(-ssim(a, b))
    assert np.allclose(g, -ssim_with_grad(a, b)[1])
