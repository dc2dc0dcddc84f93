"""Encoder, projection head, order head and permutation head.

Forward functions take either a :class:`ModelParams` (constant weights) or the
``dict`` of leaf :class:`Value` objects returned by :meth:`ModelParams.leaves`
(differentiable weights), and return a :class:`Value`.
"""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InvalidConfig, ShapeMismatch
from . import engine as E
from .engine import Value

N_PERMUTATIONS = 6


@dataclass(frozen=True)
class ModelDims:
    d_in: int = 32
    enc_hidden: int = 64
    d_f: int = 32
    proj_hidden: int = 32
    d_z: int = 16
    order_hidden: int = 32
    perm_hidden: int = 32

    def layer_shapes(self) -> dict:
        return {
            "enc.w1": (self.d_in, self.enc_hidden), "enc.b1": (self.enc_hidden,),
            "enc.w2": (self.enc_hidden, self.enc_hidden), "enc.b2": (self.enc_hidden,),
            "enc.w3": (self.enc_hidden, self.d_f), "enc.b3": (self.d_f,),
            "proj.w1": (self.d_f, self.proj_hidden), "proj.b1": (self.proj_hidden,),
            "proj.w2": (self.proj_hidden, self.d_z), "proj.b2": (self.d_z,),
            "order.w1": (2 * self.d_f, self.order_hidden), "order.b1": (self.order_hidden,),
            "order.w2": (self.order_hidden, 1), "order.b2": (1,),
            "perm.w1": (3 * self.d_f, self.perm_hidden), "perm.b1": (self.perm_hidden,),
            "perm.w2": (self.perm_hidden, N_PERMUTATIONS), "perm.b2": (N_PERMUTATIONS,),
        }


class LeafParams(dict):
    """Differentiable parameter leaves keyed by name, carrying the temperature."""

    def __init__(self, leaves, tau):
        super().__init__(leaves)
        self.tau = tau

    def grads(self) -> dict:
        return {n: (v.grad if v.grad is not None else np.zeros_like(v.value)) for n, v in self.items()}


class ModelParams:
    """Named float64 parameter arrays plus the contrastive temperature."""

    def __init__(self, dims: ModelDims, arrays: dict, tau: float = 0.1):
        if not tau > 0:
            from ..errors import NonPositiveTemperature
            raise NonPositiveTemperature(f"temperature must be > 0, got {tau}")
        shapes = dims.layer_shapes()
        if set(arrays) != set(shapes):
            raise InvalidConfig(f"parameter names {sorted(arrays)} do not match {sorted(shapes)}")
        self.dims = dims
        self.tau = float(tau)
        self.arrays = {}
        for name, shape in shapes.items():
            arr = np.array(arrays[name], dtype=np.float64)
            if arr.shape != tuple(shape):
                raise ShapeMismatch(f"{name}: expected {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise InvalidConfig(f"{name} has non-finite entries")
            self.arrays[name] = arr

    @classmethod
    def init(cls, dims: ModelDims, rng: np.random.Generator, tau: float = 0.1) -> "ModelParams":
        arrays = {}
        for name, shape in dims.layer_shapes().items():
            if len(shape) == 2:
                arrays[name] = rng.normal(size=shape) / np.sqrt(shape[0])
            else:
                arrays[name] = np.zeros(shape)
        return cls(dims, arrays, tau)

    @classmethod
    def zeros(cls, dims: ModelDims, tau: float = 0.1) -> "ModelParams":
        return cls(dims, {n: np.zeros(s) for n, s in dims.layer_shapes().items()}, tau)

    def leaves(self, names=None) -> "LeafParams":
        names = self.arrays if names is None else names
        return LeafParams({n: Value(self.arrays[n], name=n) for n in names}, self.tau)

    def copy(self) -> "ModelParams":
        return ModelParams(self.dims, {k: v.copy() for k, v in self.arrays.items()}, self.tau)

    def with_arrays(self, updates: dict) -> "ModelParams":
        merged = dict(self.arrays)
        merged.update(updates)
        return ModelParams(self.dims, merged, self.tau)

    def checksum(self) -> str:
        h = hashlib.sha256()
        for name in sorted(self.arrays):
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.arrays[name], dtype="<f8").tobytes())
        return h.hexdigest()

    def dims_dict(self) -> dict:
        return asdict(self.dims)

    def __getitem__(self, name):
        return self.arrays[name]


def _param(params, name) -> Value:
    if isinstance(params, ModelParams):
        return Value(params.arrays[name])
    return params[name]


def _dense(params, prefix, x, n_layers):
    h = x
    for i in range(1, n_layers + 1):
        h = E.matmul(h, _param(params, f"{prefix}.w{i}")) + _param(params, f"{prefix}.b{i}")
        if i < n_layers:
            h = E.tanh(h)
    return h


def _as_rows(x, width):
    x = E.as_value(x)
    single = x.ndim == 1
    if single:
        x = E.reshape(x, (1, -1))
    if x.ndim != 2 or x.shape[1] != width:
        raise ShapeMismatch(f"expected inputs of width {width}, got shape {x.shape}")
    return x, single


def _finish(out, single):
    return E.reshape(out, (out.shape[1],)) if single else out


def _width(params, name):
    arr = params.arrays[name] if isinstance(params, ModelParams) else params[name].value
    return arr.shape[0]


def encode(params, x) -> Value:
    """Backbone features for clip rows: two tanh hidden layers then a linear output."""
    rows, single = _as_rows(x, _width(params, "enc.w1"))
    return _finish(_dense(params, "enc", rows, 3), single)


def project(params, f) -> Value:
    rows, single = _as_rows(f, _width(params, "proj.w1"))
    return _finish(_dense(params, "proj", rows, 2), single)


def order_logit(params, f1, f2) -> Value:
    """Logit that the clip behind ``f1`` precedes the clip behind ``f2``."""
    f1, single = _as_rows(f1, _width(params, "order.w1") // 2)
    f2, _ = _as_rows(f2, _width(params, "order.w1") // 2)
    if f1.shape != f2.shape:
        raise ShapeMismatch(f"order pair shapes differ: {f1.shape} vs {f2.shape}")
    out = _dense(params, "order", E.concat([f1, f2], axis=1), 2)
    out = E.reshape(out, (out.shape[0],))
    return E.reshape(out, ()) if single else out


def perm_logits(params, f1, f2, f3) -> Value:
    rows = [_as_rows(f, _width(params, "perm.w1") // 3) for f in (f1, f2, f3)]
    single = rows[0][1]
    out = _dense(params, "perm", E.concat([r for r, _ in rows], axis=1), 2)
    return _finish(out, single)
