import numpy as np
import pytest

from intentlab.datamodel import Split, VideoRecord
from intentlab.nncore.model import ModelDims, ModelParams
from intentlab.sampling import NegativeScope, assemble_batch

TINY = ModelDims(d_in=4, enc_hidden=5, d_f=4, proj_hidden=4, d_z=3, order_hidden=3, perm_hidden=3)


def random_videos(rng, k, d_in=4, n_range=(6, 12), transition=False):
    out = []
    for i in range(k):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        t_a = float(rng.uniform(0.3, 0.7) * n) if transition else None
        out.append(VideoRecord(f"v{i:03d}", rng.normal(size=(n, d_in)), 1.0, t_a, Split.PRETRAIN))
    return out


def random_batch(rng, k, d_in=4, scope=NegativeScope.GLOBAL, n_range=(6, 12)):
    return assemble_batch(random_videos(rng, k, d_in, n_range), scope, rng)


def random_params(dims, rng, tau=0.5):
    return ModelParams.init(dims, rng, tau)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_dims():
    return TINY
