"""Finite-difference gradient check of the training losses over all parameters."""
import numpy as np

from intentlab.losses import total_loss
from intentlab.training import HEAD_PREFIXES
from intentlab.nncore import engine as E
from intentlab.nncore.model import ModelParams
from oracles import numeric_grads, rel_err

from conftest import TINY, random_batch


def check_mode(mode, seed, dims=TINY):
    """Worst per-tensor relative error for one random batch (K <= 3)."""
    rng = np.random.default_rng(seed)
    params = ModelParams.init(dims, rng, tau=float(rng.uniform(0.2, 1.0)))
    params = params.with_arrays({n: a + 0.1 * rng.normal(size=a.shape)
                                 for n, a in params.arrays.items() if ".b" in n})
    batch = random_batch(rng, int(rng.integers(1, 4)), d_in=dims.d_in)
    loss_seed = int(rng.integers(2**32))

    leaves = params.leaves()
    report = total_loss(batch, leaves, mode, np.random.default_rng(loss_seed))
    E.backward(report.graph)

    def loss(arrays):
        p = ModelParams(dims, arrays, params.tau)
        return total_loss(batch, p, mode, np.random.default_rng(loss_seed)).l_total

    active = [n for n in params.arrays if n.startswith(HEAD_PREFIXES[mode])]
    numeric = numeric_grads(loss, params.arrays, active)
    grads = leaves.grads()
    worst = max(rel_err(grads[n], numeric[n]) for n in active)
    # heads the mode does not use: one directional difference per tensor
    for n in params.arrays:
        if n in active:
            continue
        v = rng.normal(size=params.arrays[n].shape)
        eps = 1e-5
        d = (loss({**params.arrays, n: params.arrays[n] + eps * v})
             - loss({**params.arrays, n: params.arrays[n] - eps * v})) / (2 * eps)
        analytic = float(np.sum(grads[n] * v))
        worst = max(worst, rel_err(analytic, d))
    return worst
