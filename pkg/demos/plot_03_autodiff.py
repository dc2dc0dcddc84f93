"""
Reverse-mode gradients on numpy arrays
======================================

The model is built on a small autodiff core. Every operation records how to
push gradients back to its inputs; ``backward`` walks the graph once.
"""

import numpy as np

from intentlab.nncore import engine as E
from intentlab.nncore.engine import Value, backward

###########################################################################
# A tiny graph: normalized tanh features scored with a log-sum-exp.

rng = np.random.default_rng(0)
w = Value(rng.normal(size=(3, 4)), name="w")
x = Value(rng.normal(size=(5, 3)))
loss = E.logsumexp(E.l2_normalize(E.tanh(x @ w)) * 5.0, axis=1).mean()
backward(loss)
print("loss:", float(loss.value))

###########################################################################
# Compare with central finite differences, one entry at a time.

def f(arr):
    return float(E.logsumexp(E.l2_normalize(E.tanh(Value(x.value) @ Value(arr))) * 5.0, axis=1).mean().value)

eps = 1e-5
numeric = np.zeros_like(w.value)
for idx in np.ndindex(*w.shape):
    bump = np.zeros_like(w.value)
    bump[idx] = eps
    numeric[idx] = (f(w.value + bump) - f(w.value - bump)) / (2 * eps)
err = np.linalg.norm(w.grad - numeric) / np.linalg.norm(numeric)
print(f"relative error vs finite differences: {err:.2e}")

###########################################################################
# Gradient descent on w^2 from w = 1 with step 0.1 lands on 0.8.

from intentlab.nncore.optim import OptimState, opt_step

w = Value(np.array(1.0))
backward(w * w)
print(opt_step(OptimState(lr=0.1), {"w": w.value}, {"w": w.grad})["w"])
