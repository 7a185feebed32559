"""Dense volumes, 2D images, their file formats, and synthetic phantoms.

Axis convention: a volume with ``dims = (H, W, D)`` is held as a numpy array of
shape ``(D, H, W)``; x runs along W (fastest in memory), y along H, z along D.
Normalized coordinates map each axis onto [-1, 1] corner-to-corner.

RVOL layout (little-endian)::

    8 bytes   magic b"RVOLv001"
    3 x u32   H, W, D
    1 x f32   isotropic spacing (mm)
    H*W*D x f32 voxels, x fastest, then y, then z

Images use the same layout with D = 1, or binary PGM (P5, maxval 255).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    DataError,
    DimsMismatchError,
    FormatError,
    RangeError,
    TruncatedFileError,
)

VOLUME_MAGIC = b"RVOLv001"
_HEADER = struct.Struct("<3If")
_PAYLOAD_DTYPE = np.dtype("<f4")


@dataclass
class DenseVolume:
    voxels: np.ndarray
    spacing: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.voxels)
        if v.ndim != 3:
            raise DataError(f"volume must be 3D, got shape {v.shape}")
        if min(v.shape) < 2:
            raise DataError(f"volume dims must each be >= 2, got {self.dims}")
        self.voxels = v

    @property
    def dims(self) -> tuple[int, int, int]:
        d, h, w = self.voxels.shape
        return (h, w, d)

    @property
    def shape_xyz(self) -> tuple[int, int, int]:
        """Sizes along (x, y, z), the order used for field resolutions."""
        d, h, w = self.voxels.shape
        return (w, h, d)


@dataclass
class Image2D:
    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 2 or min(p.shape) < 2:
            raise DataError(f"image must be 2D with dims >= 2, got shape {p.shape}")
        self.pixels = p

    @property
    def dims(self) -> tuple[int, int]:
        return self.pixels.shape


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int, int] = (64, 64, 64)
    seed: int = 0
    n_ellipsoids: int = 4
    texture_freq: float = 3.0
    spacing: float = 0.6
    jitter: float = 1.0


# --------------------------------------------------------------------------
# binary formats


def _write_rvol(path, array_dhw: np.ndarray, spacing: float) -> None:
    d, h, w = array_dhw.shape
    payload = np.ascontiguousarray(array_dhw, dtype=_PAYLOAD_DTYPE).tobytes()
    with open(path, "wb") as fh:
        fh.write(VOLUME_MAGIC)
        fh.write(_HEADER.pack(h, w, d, spacing))
        fh.write(payload)


def _read_rvol(path) -> tuple[np.ndarray, float]:
    data = Path(path).read_bytes()
    header_len = len(VOLUME_MAGIC) + _HEADER.size
    if len(data) < len(VOLUME_MAGIC):
        raise TruncatedFileError(path, header_len, len(data))
    if data[:8] != VOLUME_MAGIC:
        raise BadMagicError(path, VOLUME_MAGIC, data[:8])
    if len(data) < header_len:
        raise TruncatedFileError(path, header_len, len(data))
    h, w, d, spacing = _HEADER.unpack_from(data, 8)
    expected = header_len + h * w * d * _PAYLOAD_DTYPE.itemsize
    if len(data) < expected:
        raise TruncatedFileError(path, expected, len(data))
    if len(data) > expected:
        raise DimsMismatchError(path, expected - header_len, len(data) - header_len)
    arr = np.frombuffer(data, dtype=_PAYLOAD_DTYPE, offset=header_len).reshape(d, h, w)
    return arr.astype(np.float32), spacing


def _check_range(path, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)) or arr.min(initial=0.0) < 0.0 or arr.max(initial=0.0) > 1.0:
        raise RangeError(f"{path}: intensities outside [0, 1]")


def save_volume(vol: DenseVolume, path) -> None:
    _write_rvol(path, vol.voxels, vol.spacing)


def load_volume(path) -> DenseVolume:
    arr, spacing = _read_rvol(path)
    _check_range(path, arr)
    if min(arr.shape) < 2:
        raise FormatError(f"{path}: volume dims must each be >= 2, got {arr.shape[::-1]}")
    return DenseVolume(arr, float(spacing))


def quantize_u8(pixels: np.ndarray) -> np.ndarray:
    """Round-half-up quantization of [0, 1] intensities to bytes."""
    return np.floor(np.asarray(pixels, dtype=np.float64) * 255.0 + 0.5).clip(0, 255).astype(np.uint8)


def save_image(img: Image2D, path, fmt: str | None = None) -> None:
    """Write ``img`` as PGM (P5) or raw RVOL float with dims (rows, cols, 1).

    The format follows ``fmt`` or, when omitted, the file suffix (``.pgm`` or
    anything else for raw).
    """
    if fmt is None:
        fmt = "pgm" if str(path).lower().endswith(".pgm") else "raw"
    px = np.asarray(img.pixels)
    if np.any(px < 0) or np.any(px > 1) or not np.all(np.isfinite(px)):
        raise RangeError("image pixels must lie in [0, 1]")
    if fmt == "pgm":
        rows, cols = px.shape
        with open(path, "wb") as fh:
            fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
            fh.write(quantize_u8(px).tobytes())
    elif fmt == "raw":
        _write_rvol(path, px[None, :, :], 1.0)
    else:
        raise ValueError(f"unknown image format {fmt!r}")


def _read_pgm(path, data: bytes) -> np.ndarray:
    # header tokens may be separated by arbitrary whitespace and comments
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise TruncatedFileError(path, pos + 1, len(data))
        tokens.append(int(data[start:pos]))
    pos += 1
    cols, rows, maxval = tokens
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 is supported, got {maxval}")
    expected = pos + rows * cols
    if len(data) < expected:
        raise TruncatedFileError(path, expected, len(data))
    raw = np.frombuffer(data, dtype=np.uint8, count=rows * cols, offset=pos)
    return (raw.astype(np.float32) / 255.0).reshape(rows, cols)


def load_image(path) -> Image2D:
    data = Path(path).read_bytes()
    if data[:2] == b"P5":
        return Image2D(_read_pgm(path, data))
    arr, _ = _read_rvol(path)
    if arr.shape[0] != 1:
        raise FormatError(f"{path}: expected a single-slice image, got depth {arr.shape[0]}")
    _check_range(path, arr)
    return Image2D(arr[0])


# --------------------------------------------------------------------------
# phantoms


def normalized_axis(n: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, n)


def _rot_z(deg: float) -> np.ndarray:
    t = np.deg2rad(deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _smooth_inside(rho: np.ndarray, width: float) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh((1.0 - rho) / width))


def generate_phantom(spec: PhantomSpec) -> DenseVolume:
    """Nested soft-edged ellipsoid shells plus a band-limited sinusoid texture.

    Every shell has a nominal placement shared by all seeds; the seed only
    jitters centres, semi-axes, tilt, intensity and texture phase, so phantoms
    with the same spec and different seeds look like members of one family.
    With no shells and zero texture frequency the volume is a constant 0.5.
    """
    h, w, d = spec.dims
    if min(spec.dims) < 8:
        raise DataError(f"phantom dims must each be >= 8, got {spec.dims}")
    rng = np.random.default_rng(spec.seed)
    j = spec.jitter

    z, y, x = np.meshgrid(normalized_axis(d), normalized_axis(h), normalized_axis(w), indexing="ij")
    pts = np.stack([x, y, z], axis=-1)
    vol = np.full((d, h, w), 0.5)

    outer = None
    n = spec.n_ellipsoids
    base_axes = np.array([0.82, 0.70, 0.76])
    for k in range(n):
        shrink = 1.0 - 0.62 * k / max(n, 1)
        axes = base_axes * shrink * (1.0 + j * rng.uniform(-0.08, 0.08, 3))
        centre = np.array([0.0, 0.05 * k, -0.04 * k]) + j * rng.uniform(-0.05, 0.05, 3)
        tilt = 9.0 * k + j * rng.uniform(-10.0, 10.0)
        level = (0.24 if k % 2 == 0 else -0.18) * (1.0 - 0.12 * k) + j * rng.uniform(-0.03, 0.03)
        local = (pts - centre) @ _rot_z(tilt)
        rho = np.sqrt(np.sum((local / axes) ** 2, axis=-1))
        inside = _smooth_inside(rho, 0.06)
        vol += level * inside
        if outer is None:
            outer = inside

    if spec.texture_freq > 0:
        f = spec.texture_freq
        d1 = np.array([1.0, 0.3, 0.2]) + j * rng.uniform(-0.15, 0.15, 3)
        d2 = np.array([-0.2, 1.0, 0.5]) + j * rng.uniform(-0.15, 0.15, 3)
        d1 /= np.linalg.norm(d1)
        d2 /= np.linalg.norm(d2)
        ph = j * rng.uniform(0.0, 2.0 * np.pi, 2)
        tex = np.sin(2.0 * np.pi * f * (pts @ d1) + ph[0]) * np.cos(2.0 * np.pi * f * (pts @ d2) + ph[1])
        vol += 0.08 * tex * (outer if outer is not None else 1.0)

    return DenseVolume(np.clip(vol, 0.0, 1.0).astype(np.float32), float(spec.spacing))
