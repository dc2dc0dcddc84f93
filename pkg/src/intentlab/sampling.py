"""Triplet sampling for the temporal contrastive and order losses.

Indices are 1-based clip positions. Positives are the immediate neighbours of
the anchor; clips two steps away form a margin zone that is never sampled;
negatives come from everything further out (``GLOBAL``) or only from 3 to 5
steps away (``LOCAL``).
"""
from __future__ import annotations

import enum
import functools
import logging
from dataclasses import dataclass

import numpy as np

from .datamodel import VideoRecord
from .errors import VideoTooShort

log = logging.getLogger(__name__)

MARGIN = 2
LOCAL_REACH = 5


class NegativeScope(str, enum.Enum):
    GLOBAL = "Global"
    LOCAL = "Local"


@dataclass(frozen=True)
class Triplet:
    video_id: str
    anchor: int
    positive: int
    negative: int

    @property
    def indices(self):
        return (self.anchor, self.positive, self.negative)


@dataclass(frozen=True, eq=False)
class Batch:
    triplets: tuple
    p1: np.ndarray
    p2: np.ndarray
    neg: np.ndarray

    @property
    def size(self) -> int:
        return len(self.triplets)

    def raw(self) -> np.ndarray:
        """All 3K raw feature rows stacked as (p1 rows, p2 rows, negative rows)."""
        return np.concatenate([self.p1, self.p2, self.neg], axis=0)


def positive_candidates(t: int, n: int) -> list[int]:
    _check_index(t, n)
    return [i for i in (t - 1, t + 1) if 1 <= i <= n]


def negative_candidates(t: int, n: int, scope: NegativeScope = NegativeScope.GLOBAL) -> list[int]:
    _check_index(t, n)
    scope = NegativeScope(scope)
    lo_far, hi_far = 1, n
    if scope is NegativeScope.LOCAL:
        lo_far, hi_far = max(1, t - LOCAL_REACH), min(n, t + LOCAL_REACH)
    left = range(lo_far, t - MARGIN)
    right = range(t + MARGIN + 1, hi_far + 1)
    return list(left) + list(right)


def _check_index(t, n):
    if not 1 <= t <= n:
        raise ValueError(f"clip index {t} outside [1, {n}]")


def admissible_anchors(n: int, scope: NegativeScope = NegativeScope.GLOBAL) -> list[int]:
    return list(_tables(n, NegativeScope(scope))[0])


@functools.lru_cache(maxsize=256)
def _tables(n: int, scope: NegativeScope):
    """Admissible anchors with their padded positive/negative candidate tables."""
    anchors, pos, neg = [], [], []
    for t in range(1, n + 1):
        p, q = positive_candidates(t, n), negative_candidates(t, n, scope)
        if p and q:
            anchors.append(t)
            pos.append(p)
            neg.append(q)
    width_p = max((len(p) for p in pos), default=1)
    width_q = max((len(q) for q in neg), default=1)
    pos_tab = np.zeros((len(anchors), width_p), dtype=np.int64)
    neg_tab = np.zeros((len(anchors), width_q), dtype=np.int64)
    for i, (p, q) in enumerate(zip(pos, neg)):
        pos_tab[i, : len(p)] = p
        neg_tab[i, : len(q)] = q
    counts_p = np.array([len(p) for p in pos], dtype=np.int64)
    counts_q = np.array([len(q) for q in neg], dtype=np.int64)
    for arr in (pos_tab, neg_tab, counts_p, counts_q):
        arr.setflags(write=False)
    return tuple(anchors), pos_tab, counts_p, neg_tab, counts_q


def sample_indices(n: int, scope: NegativeScope, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """Draw ``size`` (anchor, positive, negative) index rows for an ``n``-clip video.

    The anchor is uniform over admissible anchors, then the positive and the
    negative are each uniform over that anchor's candidates.
    """
    anchors, pos_tab, counts_p, neg_tab, counts_q = _tables(n, NegativeScope(scope))
    if not anchors:
        raise VideoTooShort(f"{n} clips admit no triplet")
    a = rng.integers(len(anchors), size=size)
    u = rng.random((size, 2))
    ip = (u[:, 0] * counts_p[a]).astype(np.int64)
    iq = (u[:, 1] * counts_q[a]).astype(np.int64)
    out = np.empty((size, 3), dtype=np.int64)
    out[:, 0] = np.asarray(anchors)[a]
    out[:, 1] = pos_tab[a, ip]
    out[:, 2] = neg_tab[a, iq]
    return out


def sample_triplet(video: VideoRecord, scope: NegativeScope, rng: np.random.Generator) -> Triplet:
    try:
        (t, p, q), = sample_indices(video.n_clips, scope, rng)
    except VideoTooShort:
        raise VideoTooShort(
            f"video {video.id} with {video.n_clips} clips admits no triplet", video.id
        ) from None
    return Triplet(video.id, int(t), int(p), int(q))


def assemble_batch(videos, scope: NegativeScope, rng: np.random.Generator) -> Batch:
    """One triplet per video; anchor rows go to ``p1`` and neighbour rows to ``p2``."""
    triplets = []
    rows = []
    for video in videos:
        trip = sample_triplet(video, scope, rng)
        triplets.append(trip)
        rows.append(video.features[[trip.anchor - 1, trip.positive - 1, trip.negative - 1]])
    if not triplets:
        raise ValueError("a batch needs at least one video")
    rows = np.stack(rows)
    return Batch(tuple(triplets), rows[:, 0].copy(), rows[:, 1].copy(), rows[:, 2].copy())


def usable_videos(videos, scope: NegativeScope) -> list:
    """Drop videos that admit no triplet, logging how many were skipped."""
    keep = [v for v in videos if admissible_anchors(v.n_clips, scope)]
    skipped = len(videos) - len(keep)
    if skipped:
        log.warning("skipping %d of %d videos too short for %s sampling", skipped, len(videos),
                    NegativeScope(scope).value)
    return keep
