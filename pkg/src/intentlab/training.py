"""Self-supervised pretraining loop."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidConfig, VideoTooShort
from .losses import LossMode, total_loss
from .nncore import engine as E
from .nncore.model import ModelDims, ModelParams
from .nncore.optim import OptimState, opt_step
from .sampling import NegativeScope, assemble_batch, usable_videos

log = logging.getLogger(__name__)

HEAD_PREFIXES = {
    LossMode.TEMP_ONLY: ("enc.", "proj."),
    LossMode.ORD_ONLY: ("enc.", "order."),
    LossMode.COMBINED: ("enc.", "proj.", "order."),
    LossMode.COMBINED_PERM: ("enc.", "proj.", "perm."),
}


@dataclass(frozen=True)
class PretrainConfig:
    steps: int = 2000
    batch_size: int = 16
    lr: float = 0.003
    optimizer: str = "adam"
    scope: NegativeScope = NegativeScope.GLOBAL
    mode: LossMode = LossMode.COMBINED
    tau: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "scope", NegativeScope(self.scope))
        object.__setattr__(self, "mode", LossMode(self.mode))
        if self.steps < 0 or self.batch_size < 1:
            raise InvalidConfig("steps must be >= 0 and batch_size >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scope"] = self.scope.value
        d["mode"] = self.mode.value
        return d


def init_model(dims: ModelDims, seed: int, tau: float = 0.1) -> ModelParams:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    return ModelParams.init(dims, rng, tau)


def pretrain(videos, dims: ModelDims, cfg: PretrainConfig, seed: int, params: ModelParams | None = None,
             on_step=None):
    """Train encoder and heads on annotation-free videos.

    Returns the trained parameters and one loss row per step. ``on_step`` is
    called with ``(step, LossReport)`` after each update.
    """
    if any(v.transition is not None for v in videos):
        raise InvalidConfig("pretraining videos must not carry transition annotations")
    videos = usable_videos(list(videos), cfg.scope)
    if not videos:
        raise VideoTooShort("no pretraining video admits a triplet")
    if params is None:
        params = init_model(dims, seed, cfg.tau)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(11,)))
    opt = OptimState(lr=cfg.lr, kind=cfg.optimizer)
    names = [n for n in params.arrays if n.startswith(HEAD_PREFIXES[cfg.mode])]
    k = min(cfg.batch_size, len(videos))
    rows = []
    for step in range(cfg.steps):
        pick = rng.choice(len(videos), size=k, replace=False)
        batch = assemble_batch([videos[i] for i in pick], cfg.scope, rng)
        leaves = params.leaves(names)
        merged = _merge(params, leaves)
        report = total_loss(batch, merged, cfg.mode, rng)
        E.backward(report.graph)
        params = params.with_arrays(opt_step(opt, params.arrays, leaves.grads()))
        row = {"step": step, **report.row()}
        rows.append(row)
        if on_step is not None:
            on_step(step, report)
    return params, rows


def _merge(params: ModelParams, leaves):
    """Leaves for trained names, constants for the rest."""
    from .nncore.model import LeafParams
    full = {n: leaves[n] if n in leaves else E.Value(a) for n, a in params.arrays.items()}
    return LeafParams(full, params.tau)
