import numpy as np
import pytest

from trivol.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from trivol.encoding import EncodingConfig
from trivol.errors import BadMagicError, DimsMismatchError, TruncatedFileError
from trivol.geometry import Pose
from trivol.model import FactorizedModel, ImplicitModel, render_slice


def models():
    yield FactorizedModel.create("triplanar", (5, 6, 7), 3, 4, EncodingConfig(2, True), seed=1)
    yield FactorizedModel.create("triplanar", (4, 4, 4), 2, 2, EncodingConfig(0, True), seed=2, combiner="sum")
    yield FactorizedModel.create("cp", (6, 5, 4), 3, 2, EncodingConfig(5, False), 3, 16, seed=3)
    yield ImplicitModel.create(degree=3, n_layers=3, width=16, seed=4)


@pytest.mark.parametrize("model", list(models()), ids=["tri", "tri-sum", "cp", "implicit"])
def test_round_trip_renders_bitwise(tmp_path, model):
    p = tmp_path / "m.rfld"
    save_checkpoint(model, p)
    assert p.read_bytes()[:8] == MAGIC
    back = load_checkpoint(p)
    pose = Pose([10, 20, 30], [0.1, -0.2, 0.05])
    a = render_slice(model, pose, 9, 11).pixels
    b = render_slice(back, pose, 9, 11).pixels
    assert np.array_equal(a, b)
    for k, v in model.decoder.params().items():
        assert np.array_equal(v, back.decoder.params()[k])
    if hasattr(model, "field"):
        assert back.field.kind == model.field.kind and back.field.combiner == model.field.combiner
        for k, v in model.field.params().items():
            assert np.array_equal(v, back.field.params()[k])


def test_factor_byte_layout(tmp_path):
    m = FactorizedModel.create("triplanar", (2, 3, 2), 2, 1, EncodingConfig(1, True), seed=0)
    p = tmp_path / "m.rfld"
    save_checkpoint(m, p)
    data = p.read_bytes()
    first = np.frombuffer(data[8 + 2 + 20 : 8 + 2 + 20 + 24], dtype="<f4")
    # channel 0, rank 0: XY plane row-major
    assert np.array_equal(first, m.field.xy[:, :, 0, 0].ravel())


def test_negative_cases(tmp_path):
    m = next(models())
    p = tmp_path / "m.rfld"
    save_checkpoint(m, p)
    good = p.read_bytes()
    p.write_bytes(b"RVOLv001" + good[8:])
    with pytest.raises(BadMagicError):
        load_checkpoint(p)
    p.write_bytes(good[:-3])
    with pytest.raises(TruncatedFileError):
        load_checkpoint(p)
    p.write_bytes(good[:5])
    with pytest.raises(TruncatedFileError):
        load_checkpoint(p)
    p.write_bytes(good + b"\0")
    with pytest.raises(DimsMismatchError):
        load_checkpoint(p)
