import numpy as np
import pytest

from trivol.errors import BadMagicError, DataError, DimsMismatchError, FormatError, RangeError, TruncatedFileError
from trivol.volume_io import (
    DenseVolume,
    Image2D,
    PhantomSpec,
    generate_phantom,
    load_image,
    load_volume,
    quantize_u8,
    save_image,
    save_volume,
)


def test_volume_axes():
    v = DenseVolume(np.zeros((4, 5, 6)))  # (D, H, W)
    assert v.dims == (5, 6, 4)
    assert v.shape_xyz == (6, 5, 4)
    with pytest.raises(DataError):
        DenseVolume(np.zeros((4, 5)))


def test_degenerate_phantom_is_constant():
    v = generate_phantom(PhantomSpec(dims=(8, 9, 10), n_ellipsoids=0, texture_freq=0))
    assert v.voxels.shape == (10, 8, 9)
    assert np.all(v.voxels == 0.5)


def test_phantom_determinism_and_seed_dependence():
    a = generate_phantom(PhantomSpec(dims=(24, 24, 24), seed=1))
    b = generate_phantom(PhantomSpec(dims=(24, 24, 24), seed=1))
    c = generate_phantom(PhantomSpec(dims=(24, 24, 24), seed=2))
    assert np.array_equal(a.voxels, b.voxels)
    assert np.mean(a.voxels != c.voxels) >= 0.01
    assert a.voxels.min() >= 0 and a.voxels.max() <= 1
    assert a.voxels.std() > 0.05


def test_phantom_too_small():
    with pytest.raises(DataError):
        generate_phantom(PhantomSpec(dims=(7, 16, 16)))


def test_volume_round_trip(tmp_path, small_phantom):
    p = tmp_path / "v.rvol"
    save_volume(small_phantom, p)
    back = load_volume(p)
    assert np.array_equal(back.voxels, small_phantom.voxels)
    assert back.spacing == pytest.approx(small_phantom.spacing)
    raw = p.read_bytes()
    assert raw[:8] == b"RVOLv001"
    assert len(raw) == 8 + 16 + 16**3 * 4


def test_bad_magic(tmp_path, small_phantom):
    p = tmp_path / "v.rvol"
    save_volume(small_phantom, p)
    p.write_bytes(b"XXXXXXXX" + p.read_bytes()[8:])
    with pytest.raises(BadMagicError):
        load_volume(p)


def test_truncated_payload_names_sizes(tmp_path, small_phantom):
    p = tmp_path / "v.rvol"
    save_volume(small_phantom, p)
    full = p.read_bytes()
    p.write_bytes(full[:-100])
    with pytest.raises(TruncatedFileError) as exc:
        load_volume(p)
    assert exc.value.expected == len(full) and exc.value.actual == len(full) - 100
    assert str(len(full)) in str(exc.value)
    p.write_bytes(full[:12])
    with pytest.raises(TruncatedFileError):
        load_volume(p)


def test_extra_payload_is_dims_mismatch(tmp_path, small_phantom):
    p = tmp_path / "v.rvol"
    save_volume(small_phantom, p)
    p.write_bytes(p.read_bytes() + b"\0\0\0\0")
    with pytest.raises(DimsMismatchError):
        load_volume(p)


def test_errors_are_distinct():
    assert len({BadMagicError, TruncatedFileError, DimsMismatchError}) == 3
    for e in (BadMagicError, TruncatedFileError, DimsMismatchError):
        assert issubclass(e, FormatError)


def test_out_of_range_volume(tmp_path):
    p = tmp_path / "v.rvol"
    save_volume(DenseVolume(np.full((3, 3, 3), 1.5, np.float32)), p)
    with pytest.raises(RangeError):
        load_volume(p)


def test_quantization_rule():
    assert list(quantize_u8(np.array([0.0, 0.5, 1.0]))) == [0, 128, 255]


@pytest.mark.parametrize("value,byte", [(1.0, 255), (0.0, 0), (0.5, 128)])
def test_pgm_constant_images(tmp_path, value, byte):
    p = tmp_path / "img.pgm"
    save_image(Image2D(np.full((4, 6), value)), p)
    data = p.read_bytes()
    assert data.startswith(b"P5\n6 4\n255\n")
    assert set(data[len(b"P5\n6 4\n255\n"):]) == {byte}
    assert load_image(p).pixels.shape == (4, 6)


def test_pgm_with_comments(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 2\n255\n" + bytes([0, 255, 51, 102]))
    assert np.allclose(load_image(p).pixels, [[0, 1], [0.2, 0.4]])


def test_raw_image_round_trip(tmp_path, rng):
    img = Image2D(rng.random((5, 7)).astype(np.float32))
    p = tmp_path / "img.rvol"
    save_image(img, p)
    assert np.array_equal(load_image(p).pixels, img.pixels)


def test_image_range_checked(tmp_path):
    with pytest.raises(RangeError):
        save_image(Image2D(np.full((3, 3), -0.1)), tmp_path / "x.pgm")
