"""Minimal differentiable core: autodiff engine, model heads, optimizers, checkpoints."""
from .engine import Value, backward
from .model import ModelDims, ModelParams, encode, order_logit, perm_logits, project
from .optim import OptimState, opt_step

__all__ = [
    "Value", "backward", "ModelDims", "ModelParams", "encode", "project",
    "order_logit", "perm_logits", "OptimState", "opt_step",
]
