"""Binary checkpoints holding a field, its decoder and the encoding settings.

Layout (little-endian)::

    8 bytes      magic b"RFLDv001"
    u8           kind: 0 tri-planar, 1 CP, 2 implicit baseline (no factors)
    u8           combiner: 0 product, 1 sum
    5 x u32      I, J, K, R, C
    f32 payload  factors, channel-major then rank; within one (c, r):
                 tri-planar  XY (I x J), YZ (J x K), XZ (I x K), each row-major
                 CP          vX (I), vY (J), vZ (K)
    u32          encoding degree L
    u8           include raw input (0/1)
    u32          decoder layer count n
    n x 2 x u32  (fan_in, fan_out) per layer
    f32 payload  per layer: weight (fan_in x fan_out, row-major), then bias
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .decoder import MlpParams
from .encoding import EncodingConfig
from .errors import BadMagicError, DimsMismatchError, FormatError, TruncatedFileError
from .field import CPField, TriPlanarField
from .model import FactorizedModel, ImplicitModel

MAGIC = b"RFLDv001"
_KINDS = {"triplanar": 0, "cp": 1, "implicit": 2}
_COMBINERS = {"product": 0, "sum": 1}
_F32 = np.dtype("<f4")


def _factor_payload(model) -> np.ndarray:
    if isinstance(model, ImplicitModel):
        return np.zeros(0, _F32)
    f = model.field
    if f.kind == "triplanar":
        i, j, k = f.resolution
        parts = [
            f.xy.transpose(2, 3, 0, 1).reshape(f.channels, f.rank, i * j),
            f.yz.transpose(2, 3, 0, 1).reshape(f.channels, f.rank, j * k),
            f.xz.transpose(2, 3, 0, 1).reshape(f.channels, f.rank, i * k),
        ]
    else:
        parts = [v.transpose(1, 2, 0) for v in (f.vx, f.vy, f.vz)]
    return np.concatenate(parts, axis=2).astype(_F32).ravel()


def save_checkpoint(model, path) -> None:
    if isinstance(model, ImplicitModel):
        kind, comb, dims = 2, 0, (0, 0, 0, 0, 0)
    else:
        f = model.field
        kind, comb = _KINDS[f.kind], _COMBINERS[f.combiner]
        dims = (*f.resolution, f.rank, f.channels)
    dec = model.decoder
    enc = model.encoding
    chunks = [
        MAGIC,
        struct.pack("<BB5I", kind, comb, *dims),
        _factor_payload(model).tobytes(),
        struct.pack("<IBI", enc.degree, int(enc.include_raw), dec.n_layers),
        b"".join(struct.pack("<2I", *w.shape) for w in dec.weights),
    ]
    for w, b in zip(dec.weights, dec.biases):
        chunks.append(np.ascontiguousarray(w, dtype=_F32).tobytes())
        chunks.append(np.ascontiguousarray(b, dtype=_F32).tobytes())
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, path, data: bytes):
        self.path, self.data, self.pos = path, data, 0

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise TruncatedFileError(self.path, end, len(self.data))
        out = self.data[self.pos : end]
        self.pos = end
        return out

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def floats(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(count * 4), dtype=_F32).astype(np.float32)


def load_checkpoint(path):
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        if len(data) < 8:
            raise TruncatedFileError(path, 8, len(data))
        raise BadMagicError(path, MAGIC, data[:8])
    rd = _Reader(path, data)
    rd.take(8)
    kind, comb, i, j, k, r, c = rd.unpack("<BB5I")
    if kind not in (0, 1, 2) or comb not in (0, 1):
        raise FormatError(f"{path}: unknown kind/combiner bytes {kind}/{comb}")
    combiner = "product" if comb == 0 else "sum"

    field = None
    if kind == 0:
        per = i * j + j * k + i * k
        flat = rd.floats(c * r * per).reshape(c, r, per)
        xy = flat[:, :, : i * j].reshape(c, r, i, j).transpose(2, 3, 0, 1)
        yz = flat[:, :, i * j : i * j + j * k].reshape(c, r, j, k).transpose(2, 3, 0, 1)
        xz = flat[:, :, i * j + j * k :].reshape(c, r, i, k).transpose(2, 3, 0, 1)
        field = TriPlanarField(*(np.ascontiguousarray(a) for a in (xy, yz, xz)), combiner)
    elif kind == 1:
        flat = rd.floats(c * r * (i + j + k)).reshape(c, r, i + j + k)
        vx = flat[:, :, :i].transpose(2, 0, 1)
        vy = flat[:, :, i : i + j].transpose(2, 0, 1)
        vz = flat[:, :, i + j :].transpose(2, 0, 1)
        field = CPField(*(np.ascontiguousarray(a) for a in (vx, vy, vz)))

    degree, raw, n_layers = rd.unpack("<IBI")
    shapes = [rd.unpack("<2I") for _ in range(n_layers)]
    weights, biases = [], []
    for fi, fo in shapes:
        weights.append(rd.floats(fi * fo).reshape(fi, fo))
        biases.append(rd.floats(fo))
    if rd.pos != len(data):
        raise DimsMismatchError(path, rd.pos, len(data))
    decoder = MlpParams(weights, biases)
    enc = EncodingConfig(degree, bool(raw))
    if field is None:
        return ImplicitModel(decoder, enc)
    return FactorizedModel(field, decoder, enc)
