"""Temporal contrastive loss, pairwise order loss and the permutation variant.

Every loss returns a differentiable :class:`~intentlab.nncore.Value`; use
``float(loss.value)`` for the number.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateIndices, EmptyNegativeSet, NonPositiveTemperature, ZeroVector
from .nncore import engine as E
from .nncore.engine import Value
from .nncore.model import ModelParams, encode, order_logit, perm_logits, project
from .sampling import Batch

PERMUTATIONS = tuple(itertools.permutations(range(3)))


class LossMode(str, enum.Enum):
    TEMP_ONLY = "TempOnly"
    ORD_ONLY = "OrdOnly"
    COMBINED = "Combined"
    COMBINED_PERM = "CombinedPermutation"

    @property
    def uses_temporal(self):
        return self is not LossMode.ORD_ONLY

    @property
    def order_kind(self):
        return {LossMode.TEMP_ONLY: None, LossMode.COMBINED_PERM: "permutation"}.get(self, "pair")


@dataclass(frozen=True)
class LossReport:
    l_temp: float
    l_ord: float
    l_total: float
    pair_count: int
    negative_count: int
    graph: Value | None = field(default=None, compare=False, repr=False)

    def row(self) -> dict:
        return {
            "l_temp": self.l_temp, "l_ord": self.l_ord, "l_total": self.l_total,
            "pair_count": self.pair_count, "negative_count": self.negative_count,
        }


def _tau(params, tau):
    if tau is None:
        tau = params.tau if isinstance(params, ModelParams) else getattr(params, "tau", None)
    if tau is None or not tau > 0:
        raise NonPositiveTemperature(f"temperature must be > 0, got {tau}")
    return float(tau)


def similarity_q(x, y, tau: float) -> float:
    """``exp(cos(x, y) / tau)``."""
    if not tau > 0:
        raise NonPositiveTemperature(f"temperature must be > 0, got {tau}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ZeroVector("similarity is undefined for a zero vector")
    cos = float(np.clip(x @ y / (nx * ny), -1.0, 1.0))
    return float(np.exp(cos / tau))


def _nce_rows(anchor: Value, positive: Value, negatives: Value, tau: float) -> Value:
    """Per-row InfoNCE for unit-norm rows; every row is scored against all negatives."""
    pos = (anchor * positive).sum(axis=1, keepdims=True)
    neg = E.matmul(anchor, negatives.T)
    logits = E.concat([pos, neg], axis=1) * (1.0 / tau)
    return E.logsumexp(logits, axis=1) - logits[:, 0]


def info_nce_embeddings(zx, zy, zn, tau: float) -> Value:
    """InfoNCE on already-projected vectors ``zx``, ``zy`` and negative rows ``zn``."""
    if not tau > 0:
        raise NonPositiveTemperature(f"temperature must be > 0, got {tau}")
    zn = E.as_value(zn)
    if zn.ndim != 2 or zn.shape[0] == 0:
        raise EmptyNegativeSet("InfoNCE needs at least one negative")
    ux = E.l2_normalize(E.reshape(E.as_value(zx), (1, -1)))
    uy = E.l2_normalize(E.reshape(E.as_value(zy), (1, -1)))
    un = E.l2_normalize(zn)
    return E.reshape(_nce_rows(ux, uy, un, tau), ())


def info_nce(x, y, negatives, params, tau: float | None = None) -> Value:
    """InfoNCE of positive pair ``(x, y)`` against ``negatives`` after the projection head."""
    negatives = np.atleast_2d(np.asarray(negatives, dtype=np.float64)) if not isinstance(negatives, Value) else negatives
    if negatives.shape[0] == 0 or negatives.size == 0:
        raise EmptyNegativeSet("InfoNCE needs at least one negative")
    tau = _tau(params, tau)
    return info_nce_embeddings(project(params, x), project(params, y), project(params, negatives), tau)


def _split3(f: Value, k: int):
    return f[:k], f[k:2 * k], f[2 * k:]


def temporal_from_embeddings(z, k: int, tau: float) -> Value:
    """Symmetric InfoNCE over K positive pairs that share the K negatives.

    ``z`` holds 3K projected rows ordered as (first positives, second
    positives, negatives).
    """
    if not tau > 0:
        raise NonPositiveTemperature(f"temperature must be > 0, got {tau}")
    if k < 1:
        raise EmptyNegativeSet("the temporal loss needs at least one triplet")
    u = E.l2_normalize(E.as_value(z))
    u1, u2, un = _split3(u, k)
    both = _nce_rows(u1, u2, un, tau).sum() + _nce_rows(u2, u1, un, tau).sum()
    return both * (1.0 / (2 * k))


def temporal_from_features(f: Value, k: int, params, tau: float) -> Value:
    return temporal_from_embeddings(project(params, f), k, tau)


def order_pairs(batch: Batch, rng: np.random.Generator):
    """Row indices into the stacked (p1, p2, neg) features and labels for the 3K pairs.

    Each within-video pair is listed in a random order; the label is 1 when the
    first-listed clip comes earlier in the video.
    """
    k = batch.size
    swaps = rng.random((k, 3)) < 0.5
    first, second, labels = [], [], []
    for i, trip in enumerate(batch.triplets):
        rows = (i, k + i, 2 * k + i)
        idx = trip.indices
        for j, (a, b) in enumerate(((0, 1), (0, 2), (1, 2))):
            if idx[a] == idx[b]:
                raise DegenerateIndices(f"triplet {trip} has repeated clip index {idx[a]}")
            if swaps[i, j]:
                a, b = b, a
            first.append(rows[a])
            second.append(rows[b])
            labels.append(1.0 if idx[a] < idx[b] else 0.0)
    return np.array(first), np.array(second), np.array(labels)


def pair_order_from_features(f: Value, batch: Batch, params, rng) -> Value:
    first, second, labels = order_pairs(batch, rng)
    logits = order_logit(params, f[first], f[second])
    return E.binary_cross_entropy_with_logits(logits, labels)


def permutation_targets(batch: Batch, rng: np.random.Generator):
    """Row orderings and class ids for the permutation task.

    The three clips of a triplet are sorted by time, then shuffled by a
    uniformly drawn permutation whose index is the target class.
    """
    k = batch.size
    perms = rng.integers(len(PERMUTATIONS), size=k)
    order = np.empty((k, 3), dtype=np.int64)
    for i, trip in enumerate(batch.triplets):
        rows = np.array([i, k + i, 2 * k + i])
        by_time = rows[np.argsort(trip.indices, kind="stable")]
        order[i] = by_time[list(PERMUTATIONS[perms[i]])]
    return order, perms


def permutation_from_features(f: Value, batch: Batch, params, rng) -> Value:
    order, perms = permutation_targets(batch, rng)
    logits = perm_logits(params, f[order[:, 0]], f[order[:, 1]], f[order[:, 2]])
    return E.cross_entropy(logits, perms)


def _features(batch: Batch, params) -> Value:
    return encode(params, batch.raw())


def temporal_contrastive(batch: Batch, params, tau: float | None = None) -> Value:
    return temporal_from_features(_features(batch, params), batch.size, params, _tau(params, tau))


def pair_order_loss(batch: Batch, params, rng: np.random.Generator) -> Value:
    return pair_order_from_features(_features(batch, params), batch, params, rng)


def permutation_loss(batch: Batch, params, rng: np.random.Generator) -> Value:
    return permutation_from_features(_features(batch, params), batch, params, rng)


def total_loss(batch: Batch, params, mode: LossMode, rng: np.random.Generator,
               tau: float | None = None) -> LossReport:
    """Unit-weight sum of the active loss terms; the inactive term reports 0."""
    mode = LossMode(mode)
    f = _features(batch, params)
    k = batch.size
    total = None
    l_temp = l_ord = 0.0
    pairs = negatives = 0
    if mode.uses_temporal:
        temp = temporal_from_features(f, k, params, _tau(params, tau))
        l_temp = float(temp.value)
        total = temp
        negatives = k
    if mode.order_kind == "pair":
        ordl = pair_order_from_features(f, batch, params, rng)
        pairs = 3 * k
    elif mode.order_kind == "permutation":
        ordl = permutation_from_features(f, batch, params, rng)
        pairs = k
    else:
        ordl = None
    if ordl is not None:
        l_ord = float(ordl.value)
        total = ordl if total is None else total + ordl
    return LossReport(l_temp, l_ord, float(total.value), pairs, negatives, total)
