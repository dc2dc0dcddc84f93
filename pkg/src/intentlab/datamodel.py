"""Videos, clips and the intent-labeling rules.

Time is measured in seconds. A video record stores one raw feature row per
1-second clip, rows spaced ``clip_stride`` seconds apart; clip ``t`` (1-based)
starts at ``(t - 1) * clip_stride``.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import (
    HorizonNotMultipleOfStride,
    InvalidConfig,
    MissingAnnotation,
    NonPositiveDuration,
    VideoTooShort,
)

CLIP_SECONDS = 1.0
_EPS = 1e-9


class IntentLabel(enum.IntEnum):
    INTENTIONAL = 0
    TRANSITIONAL = 1
    UNINTENTIONAL = 2


class Split(str, enum.Enum):
    PRETRAIN = "PretrainUnlabeled"
    TRAIN = "LabeledTrain"
    TEST = "LabeledTest"


@dataclass(frozen=True)
class ClipSpec:
    video_id: str
    index: int
    start: float
    duration: float = CLIP_SECONDS

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"clip index must be >= 1, got {self.index}")
        if not self.duration > 0:
            raise NonPositiveDuration(f"clip duration must be > 0, got {self.duration}")
        if self.start < 0:
            raise ValueError(f"clip start must be >= 0, got {self.start}")

    @property
    def end(self) -> float:
        return self.start + self.duration

    @property
    def center(self) -> float:
        return self.start + 0.5 * self.duration


@dataclass(frozen=True, eq=False)
class VideoRecord:
    id: str
    features: np.ndarray
    clip_stride: float = 1.0
    transition: Optional[float] = None
    split: Split = Split.PRETRAIN

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64, copy=True)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise InvalidConfig(f"video {self.id}: features must be a non-empty (n, d) matrix")
        if not np.all(np.isfinite(feats)):
            raise InvalidConfig(f"video {self.id}: non-finite feature entries")
        if not self.clip_stride > 0:
            raise InvalidConfig(f"video {self.id}: clip_stride must be > 0")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "split", Split(self.split))
        if self.transition is not None:
            t_a = float(self.transition)
            if not (0.0 <= t_a <= self.end_time):
                raise InvalidConfig(
                    f"video {self.id}: transition {t_a} outside [0, {self.end_time}]"
                )
            object.__setattr__(self, "transition", t_a)

    @property
    def n_clips(self) -> int:
        return self.features.shape[0]

    @property
    def end_time(self) -> float:
        return (self.n_clips - 1) * self.clip_stride + CLIP_SECONDS

    def without_annotation(self) -> "VideoRecord":
        return replace(self, transition=None)

    def __eq__(self, other):
        if not isinstance(other, VideoRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.clip_stride == other.clip_stride
            and self.transition == other.transition
            and self.split == other.split
            and np.array_equal(self.features, other.features)
        )

    __hash__ = None


def label_clip(start: float, duration: float, t_a: float) -> IntentLabel:
    """Intent label of the clip ``[start, start + duration]`` given transition ``t_a``.

    A clip ending exactly at ``t_a`` counts as intentional; one starting exactly
    at ``t_a`` counts as unintentional.
    """
    if not duration > 0:
        raise NonPositiveDuration(f"duration must be > 0, got {duration}")
    if t_a < 0:
        raise ValueError(f"transition time must be >= 0, got {t_a}")
    if start + duration <= t_a:
        return IntentLabel.INTENTIONAL
    if start >= t_a:
        return IntentLabel.UNINTENTIONAL
    return IntentLabel.TRANSITIONAL


def eval_clip_starts(end_time: float, stride: float = 0.25, window: float = CLIP_SECONDS) -> np.ndarray:
    if not stride > 0:
        raise InvalidConfig(f"stride must be > 0, got {stride}")
    if not window > 0:
        raise NonPositiveDuration(f"window must be > 0, got {window}")
    span = end_time - window
    if span < -_EPS:
        raise VideoTooShort(f"video of {end_time:g} s is shorter than one {window:g} s window")
    count = int(math.floor(max(span, 0.0) / stride + _EPS)) + 1
    return np.arange(count) * stride


def extract_eval_clips(video: VideoRecord, stride: float = 0.25, window: float = CLIP_SECONDS):
    """Tile the video with ``window``-second clips every ``stride`` seconds and label them.

    Tail clips that would run past the end of the video are dropped.
    """
    if video.transition is None:
        raise MissingAnnotation(f"video {video.id} has no transition annotation")
    try:
        starts = eval_clip_starts(video.end_time, stride, window)
    except VideoTooShort as exc:
        raise VideoTooShort(str(exc), video.id) from None
    return [
        (ClipSpec(video.id, i + 1, float(s), window), label_clip(float(s), window, video.transition))
        for i, s in enumerate(starts)
    ]


def clip_features(video: VideoRecord, starts) -> np.ndarray:
    """Raw features for clips starting at arbitrary times.

    Rows are linearly interpolated between the two stored clips that bracket
    each start time.
    """
    pos = np.asarray(starts, dtype=np.float64) / video.clip_stride
    pos = np.clip(pos, 0.0, video.n_clips - 1)
    lo = np.floor(pos + _EPS).astype(int)
    lo = np.minimum(lo, video.n_clips - 1)
    hi = np.minimum(lo + 1, video.n_clips - 1)
    w = np.clip(pos - lo, 0.0, 1.0)[:, None]
    return (1.0 - w) * video.features[lo] + w * video.features[hi]


def _infer_stride(clips) -> Optional[float]:
    if len(clips) < 2:
        return None
    return clips[1][0].start - clips[0][0].start


def anticipation_pairs(clips, horizon: float = 1.5, stride: Optional[float] = None):
    """Pair each clip with the label of the clip starting ``horizon`` seconds later.

    Clips without such a successor are dropped.
    """
    if stride is None:
        stride = _infer_stride(clips)
    if horizon < 0:
        raise HorizonNotMultipleOfStride(f"horizon must be >= 0, got {horizon}")
    if horizon == 0:
        return [(spec, label) for spec, label in clips]
    if stride is None:
        # a single clip has no successor at any positive horizon
        return []
    steps = horizon / stride
    if abs(steps - round(steps)) > 1e-6:
        raise HorizonNotMultipleOfStride(
            f"horizon {horizon:g} s is not a multiple of stride {stride:g} s"
        )
    steps = int(round(steps))
    return [(clips[i][0], clips[i + steps][1]) for i in range(len(clips) - steps)]


# ---------------------------------------------------------------------------
# line-delimited record format


def video_to_json(video: VideoRecord) -> dict:
    return {
        "id": video.id,
        "clip_stride": video.clip_stride,
        "transition": video.transition,
        "split": video.split.value,
        "features": video.features.tolist(),
    }


def video_from_json(obj: dict, drop_annotation: bool = False) -> VideoRecord:
    return VideoRecord(
        id=str(obj["id"]),
        features=np.asarray(obj["features"], dtype=np.float64),
        clip_stride=float(obj["clip_stride"]),
        transition=None if drop_annotation else obj.get("transition"),
        split=Split(obj["split"]),
    )


def write_videos(path, videos: Iterable[VideoRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in videos:
            fh.write(json.dumps(video_to_json(v), separators=(",", ":")))
            fh.write("\n")


def read_videos(path, drop_annotation: bool = False) -> list[VideoRecord]:
    out = []
    with open(Path(path), encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(video_from_json(json.loads(line), drop_annotation=drop_annotation))
    return out
