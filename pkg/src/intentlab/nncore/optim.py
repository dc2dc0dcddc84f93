"""Plain gradient descent and Adam over named parameter arrays."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidConfig, ShapeMismatch


@dataclass
class OptimState:
    lr: float
    kind: str = "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.lr > 0:
            raise InvalidConfig(f"learning rate must be > 0, got {self.lr}")
        if self.kind not in ("sgd", "adam"):
            raise InvalidConfig(f"unknown optimizer {self.kind!r}")


def opt_step(opt: OptimState, arrays: dict, grads: dict, lrs: dict | None = None) -> dict:
    """Return updated copies of ``arrays``; names missing from ``grads`` are left alone.

    ``lrs`` optionally overrides the learning rate per parameter name.
    """
    opt.step += 1
    out = dict(arrays)
    for name, g in grads.items():
        w = arrays[name]
        if g.shape != w.shape:
            raise ShapeMismatch(f"{name}: gradient {g.shape} vs parameter {w.shape}")
        lr = opt.lr if lrs is None else lrs.get(name, opt.lr)
        if opt.kind == "sgd":
            out[name] = w - lr * g
            continue
        m = opt.m.get(name, np.zeros_like(w))
        v = opt.v.get(name, np.zeros_like(w))
        m = opt.beta1 * m + (1.0 - opt.beta1) * g
        v = opt.beta2 * v + (1.0 - opt.beta2) * g * g
        opt.m[name], opt.v[name] = m, v
        m_hat = m / (1.0 - opt.beta1 ** opt.step)
        v_hat = v / (1.0 - opt.beta2 ** opt.step)
        out[name] = w - lr * m_hat / (np.sqrt(v_hat) + opt.eps)
    return out
