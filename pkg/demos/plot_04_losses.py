"""
Contrastive and order losses
============================

Pretraining combines two signals. The temporal contrastive term pulls
neighbouring clips together in a projected space and pushes them away from
the negatives shared by the whole batch. The order term asks a small head
which of two clips from the same video came first.
"""

import math

import numpy as np

from intentlab.losses import LossMode, info_nce_embeddings, total_loss
from intentlab.nncore.model import ModelDims
from intentlab.sampling import NegativeScope, assemble_batch
from intentlab.synthgen import GenConfig, generate_dataset
from intentlab.training import init_model

###########################################################################
# With every similarity equal, InfoNCE is log of (negatives + 1).

e = np.eye(4)
print(float(info_nce_embeddings(e[0], e[1], e[2:], 0.1).value), math.log(3))

###########################################################################
# A positive identical to the anchor and two orthogonal negatives at unit
# temperature: -log(e / (e + 2)).

e = np.eye(3)
print(float(info_nce_embeddings(e[0], e[0], e[1:], 1.0).value), -math.log(math.e / (math.e + 2)))

###########################################################################
# The total loss on a real batch, in every mode. Untrained, the order term
# starts close to ln 2 and the permutation term close to log 6.

ds = generate_dataset(GenConfig(seed=0), counts=(16, 1, 1))
params = init_model(ModelDims(), seed=0)
batch = assemble_batch(ds.pretrain_view(), NegativeScope.GLOBAL, np.random.default_rng(0))
for mode in LossMode:
    report = total_loss(batch, params, mode, np.random.default_rng(1))
    print(f"{mode.value:>20}: {report.row()}")
