"""
Sampling triplets for pretraining
=================================

A triplet is an anchor clip, one of its immediate neighbours and a negative
clip at least three steps away. Clips two steps away form a margin that is
never used. The local variant also caps the negative at five steps.
"""

import numpy as np

from intentlab.sampling import (
    NegativeScope, admissible_anchors, assemble_batch, negative_candidates, positive_candidates,
    sample_indices,
)
from intentlab.synthgen import GenConfig, generate_dataset

###########################################################################
# Candidate sets for anchor 5 in a 12-clip video.

print("positives:", positive_candidates(5, 12))
print("global negatives:", negative_candidates(5, 12, NegativeScope.GLOBAL))
print("local negatives:", negative_candidates(5, 12, NegativeScope.LOCAL))

###########################################################################
# Very short videos only admit a few anchors; three clips admit none.

for n in (3, 4, 6):
    print(n, "clips -> admissible anchors", admissible_anchors(n))

###########################################################################
# Draw many triplets from a 20-clip video and look at how far the negative
# lands from the anchor.

rng = np.random.default_rng(0)
for scope in NegativeScope:
    draws = sample_indices(20, scope, rng, size=50_000)
    dist = np.abs(draws[:, 2] - draws[:, 0])
    counts = np.bincount(dist, minlength=20)
    print(scope.value, {d: int(c) for d, c in enumerate(counts) if c})

###########################################################################
# A batch holds one triplet per video; its raw rows are stacked as
# anchors, then neighbours, then negatives.

ds = generate_dataset(GenConfig(seed=1), counts=(8, 1, 1))
batch = assemble_batch(ds.pretrain_view(), NegativeScope.GLOBAL, rng)
for trip in batch.triplets[:3]:
    print(trip)
print("raw rows:", batch.raw().shape)
