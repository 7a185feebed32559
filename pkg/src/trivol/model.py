"""Renderable representations: factorized field + decoder, and the implicit baseline.

Both expose the same surface to the trainer:

* ``forward(coords_or_plan)`` -> (intensities (n,), cache)
* ``backward(cache, d_intensities, want_coord)`` -> coordinate gradient (n, 3),
  accumulating parameter gradients into ``model.grads``
* ``groups()`` -> {group name: (params dict, grads dict)}
"""
from __future__ import annotations

import numpy as np

from . import field as fld
from .decoder import MlpConfig, MlpParams, init_mlp, mlp_backward, mlp_forward
from .encoding import EncodingConfig, encode_backward, encode_with_cache
from .geometry import Pose, pose_to_grid
from .volume_io import Image2D

# multiply-adds per factor component and sample: 4 per bilinear lookup on
# three planes plus 2 to combine; CP uses 2 per linear lookup on three vectors
_TRIPLANAR_MACS = 14
_CP_MACS = 8


class FactorizedModel:
    def __init__(self, field: fld.Field, decoder: MlpParams, encoding: EncodingConfig):
        expected = encoding.output_width(field.channels)
        if decoder.input_width != expected:
            raise ValueError(f"decoder input width {decoder.input_width} != encoded width {expected}")
        self.field = field
        self.decoder = decoder
        self.encoding = encoding
        self.grads = {
            "field": fld.FieldGradients.like(field),
            "decoder": {k: np.zeros_like(v) for k, v in decoder.params().items()},
        }

    representation = property(lambda self: self.field.kind)

    @classmethod
    def create(cls, kind, resolution, rank, channels, encoding: EncodingConfig, mlp_layers=2,
               mlp_width=64, seed=0, combiner="product", dtype=np.float32):
        field = fld.init_field(resolution, rank, channels, kind, seed, combiner, dtype)
        cfg = MlpConfig(mlp_layers, mlp_width, encoding.output_width(channels))
        # decoder stream is decorrelated from the factor stream
        decoder = init_mlp(cfg, seed + 7919, dtype)
        return cls(field, decoder, encoding)

    @property
    def dtype(self):
        return self.field.dtype

    def plan(self, coords) -> fld.SamplePlan:
        return fld.plan_samples(coords, self.field.resolution, self.field.dtype)

    def forward(self, coords_or_plan):
        plan = coords_or_plan if isinstance(coords_or_plan, fld.SamplePlan) else self.plan(coords_or_plan)
        feats = fld.sample_planned(self.field, plan)
        enc, ecache = encode_with_cache(feats, self.encoding)
        y, mcache = mlp_forward(self.decoder, enc, return_cache=True)
        return y, (plan, feats, enc, ecache, mcache)

    def backward(self, cache, d_out, want_coord=False):
        plan, feats, enc, ecache, mcache = cache
        mgrads, d_enc = mlp_backward(self.decoder, enc, d_out, mcache)
        for k, v in mgrads.params().items():
            self.grads["decoder"][k] += v
        d_feat = encode_backward(feats, self.encoding, d_enc, ecache)
        return fld.backward_planned(self.field, plan, d_feat, self.grads["field"], want_coord)

    def zero_grad(self):
        self.grads["field"].zero()
        for v in self.grads["decoder"].values():
            v.fill(0)

    def groups(self):
        return {
            "field": (self.field.params(), self.grads["field"]),
            "decoder": (self.decoder.params(), self.grads["decoder"]),
        }

    def multiply_adds_per_pixel(self) -> int:
        per = _TRIPLANAR_MACS if self.field.kind == "triplanar" else _CP_MACS
        interp = per * self.field.rank * self.field.channels
        enc = self.field.channels * 2 * self.encoding.degree
        return interp + enc + self.decoder.multiply_adds()

    def copy(self) -> "FactorizedModel":
        return FactorizedModel(self.field.copy(), self.decoder.copy(), self.encoding)


class ImplicitModel:
    """Coordinate network: encoded (x, y, z) -> MLP -> intensity.

    Stand-in for a fully implicit reconstruction network; used only as the
    speed/accuracy comparator.
    """

    representation = "implicit"

    def __init__(self, decoder: MlpParams, encoding: EncodingConfig):
        if decoder.input_width != encoding.output_width(3):
            raise ValueError("implicit network input width does not match coordinate encoding")
        self.decoder = decoder
        self.encoding = encoding
        self.grads = {"implicit": {k: np.zeros_like(v) for k, v in decoder.params().items()}}

    @classmethod
    def create(cls, degree=10, n_layers=6, width=128, seed=0, dtype=np.float32):
        enc = EncodingConfig(degree, True)
        cfg = MlpConfig(n_layers, width, enc.output_width(3))
        return cls(init_mlp(cfg, seed + 7919, dtype), enc)

    @property
    def dtype(self):
        return self.decoder.weights[0].dtype

    def plan(self, coords):
        return np.asarray(coords, dtype=self.dtype).reshape(-1, 3)

    def forward(self, coords):
        x = np.asarray(coords, dtype=self.dtype).reshape(-1, 3)
        enc, ecache = encode_with_cache(x, self.encoding)
        y, mcache = mlp_forward(self.decoder, enc, return_cache=True)
        return y, (x, enc, ecache, mcache)

    def backward(self, cache, d_out, want_coord=False):
        x, enc, ecache, mcache = cache
        mgrads, d_enc = mlp_backward(self.decoder, enc, d_out, mcache)
        for k, v in mgrads.params().items():
            self.grads["implicit"][k] += v
        if not want_coord:
            return np.zeros_like(x)
        # no clamping here: the network is defined on all of R^3
        return encode_backward(x, self.encoding, d_enc, ecache)

    def zero_grad(self):
        for v in self.grads["implicit"].values():
            v.fill(0)

    def groups(self):
        return {"implicit": (self.decoder.params(), self.grads["implicit"])}

    def multiply_adds_per_pixel(self) -> int:
        return 3 * 2 * self.encoding.degree + self.decoder.multiply_adds()

    def copy(self) -> "ImplicitModel":
        return ImplicitModel(self.decoder.copy(), self.encoding)


def render_coords(model, coords) -> np.ndarray:
    return model.forward(coords)[0]


def render_slice(model, pose: Pose, rows: int, cols: int, extent: float = 1.0) -> Image2D:
    """Render one cross-section at any pose and resolution; parameters are untouched."""
    grid = pose_to_grid(pose, rows, cols, extent)
    y = render_coords(model, grid.coords)
    return Image2D(y.reshape(rows, cols))


def implicit_render(model: ImplicitModel, grid) -> Image2D:
    rows, cols = grid.dims
    return Image2D(render_coords(model, grid.coords).reshape(rows, cols))
