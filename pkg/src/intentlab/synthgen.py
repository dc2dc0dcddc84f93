"""Synthetic videos with a latent regime change at an annotated transition.

Each video is a walk of a low-dimensional latent state. A clip is described
by the state at its start together with the displacement it covers during
its second of footage, and that descriptor is pushed through a fixed random
linear map shared by the whole dataset, plus isotropic noise.

At the clip containing the transition time the walk changes regime: its drift
direction is re-drawn and its step magnitude is scaled by ``1 + regime_shift``.
No single feature jumps at the transition; the change is visible only in how
the trajectory moves.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .datamodel import CLIP_SECONDS, Split, VideoRecord
from .errors import InvalidConfig

LATENT_DIM = 8

_SPLIT_CODES = {Split.PRETRAIN: 0, Split.TRAIN: 1, Split.TEST: 2}


@dataclass(frozen=True)
class GenConfig:
    d_in: int = 32
    n_range: tuple = (12, 24)
    transition_quantile_range: tuple = (0.3, 0.7)
    noise_sigma: float = 0.05
    regime_shift: float = 2.0
    seed: int = 0
    step_size: float = 0.5
    motion_gain: float = 4.0
    speed_jitter: float = 0.15
    clip_stride: float = CLIP_SECONDS

    def __post_init__(self):
        object.__setattr__(self, "n_range", tuple(int(v) for v in self.n_range))
        object.__setattr__(
            self, "transition_quantile_range", tuple(float(v) for v in self.transition_quantile_range)
        )
        self.validate()

    def validate(self) -> None:
        lo_n, hi_n = self.n_range
        if lo_n < 4 or hi_n < lo_n:
            raise InvalidConfig(f"n_range must satisfy 4 <= min <= max, got {self.n_range}")
        lo, hi = self.transition_quantile_range
        if not (0.0 < lo < hi < 1.0):
            raise InvalidConfig(f"transition_quantile_range must satisfy 0 < lo < hi < 1, got {(lo, hi)}")
        if self.d_in < 1:
            raise InvalidConfig("d_in must be >= 1")
        for name in ("noise_sigma", "regime_shift", "speed_jitter", "motion_gain"):
            if not getattr(self, name) >= 0:
                raise InvalidConfig(f"{name} must be >= 0")
        if not self.step_size > 0:
            raise InvalidConfig("step_size must be > 0")
        if not self.clip_stride > 0:
            raise InvalidConfig("clip_stride must be > 0")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_range"] = list(self.n_range)
        d["transition_quantile_range"] = list(self.transition_quantile_range)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Dataset:
    config: GenConfig
    pretrain: tuple = field(default_factory=tuple)
    train: tuple = field(default_factory=tuple)
    test: tuple = field(default_factory=tuple)

    def pretrain_view(self) -> list[VideoRecord]:
        """Pretraining videos with their transition annotations stripped."""
        return [v.without_annotation() for v in self.pretrain]

    def __len__(self):
        return len(self.pretrain) + len(self.train) + len(self.test)


def dataset_map(cfg: GenConfig) -> np.ndarray:
    """The fixed linear map from clip descriptors to raw features."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(99,)))
    return rng.normal(size=(2 * LATENT_DIM, cfg.d_in)) / np.sqrt(2 * LATENT_DIM)


def video_rng(seed: int, split: Split, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_SPLIT_CODES[Split(split)], index)))


def _unit(rng, dim):
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def generate_video(cfg: GenConfig, rng: np.random.Generator, video_id: str = "v0",
                   split: Split = Split.PRETRAIN, mixing: np.ndarray | None = None) -> VideoRecord:
    if mixing is None:
        mixing = dataset_map(cfg)
    n = int(rng.integers(cfg.n_range[0], cfg.n_range[1] + 1))
    end_time = (n - 1) * cfg.clip_stride + CLIP_SECONDS
    lo, hi = cfg.transition_quantile_range
    t_a = float(rng.uniform(lo, hi) * end_time)

    offset = rng.normal(size=LATENT_DIM)
    speed = cfg.step_size * float(np.exp(cfg.speed_jitter * rng.normal()))
    direction = _unit(rng, LATENT_DIM)
    post_direction = _unit(rng, LATENT_DIM)

    post_speed = speed * (1.0 + cfg.regime_shift)
    # fraction of each clip's second spent before the transition
    starts = np.arange(n) * cfg.clip_stride
    before = np.clip((t_a - starts) / CLIP_SECONDS, 0.0, 1.0)
    steps = before[:, None] * speed * direction + (1.0 - before[:, None]) * post_speed * post_direction
    states = np.cumsum(steps, axis=0) - steps
    # center the path on a random point so distance travelled does not reveal elapsed time
    states = states - states.mean(axis=0) + offset
    descriptors = np.concatenate([states, cfg.motion_gain * steps], axis=1)
    noise = rng.normal(size=(n, cfg.d_in))
    feats = descriptors @ mixing + cfg.noise_sigma * noise
    return VideoRecord(id=video_id, features=feats, clip_stride=cfg.clip_stride,
                       transition=t_a, split=split)


def generate_split(cfg: GenConfig, split: Split, count: int, mixing: np.ndarray | None = None) -> tuple:
    if mixing is None:
        mixing = dataset_map(cfg)
    prefix = {Split.PRETRAIN: "pre", Split.TRAIN: "trn", Split.TEST: "tst"}[Split(split)]
    return tuple(
        generate_video(cfg, video_rng(cfg.seed, split, i), f"{prefix}{i:05d}", split, mixing)
        for i in range(count)
    )


def generate_dataset(cfg: GenConfig, counts=(600, 200, 200)) -> Dataset:
    counts = tuple(int(c) for c in counts)
    if len(counts) != 3 or min(counts) < 1:
        raise InvalidConfig(f"counts must be three positive integers, got {counts}")
    mixing = dataset_map(cfg)
    return Dataset(
        config=cfg,
        pretrain=generate_split(cfg, Split.PRETRAIN, counts[0], mixing),
        train=generate_split(cfg, Split.TRAIN, counts[1], mixing),
        test=generate_split(cfg, Split.TEST, counts[2], mixing),
    )
