"""Run configuration with lossless JSON round-trip and a stable digest."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import InvalidConfig
from .evaluation import ProbeConfig, Regime
from .nncore.model import ModelDims
from .synthgen import GenConfig
from .training import PretrainConfig


def digest_of(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class EvalSettings:
    labeled_fraction: float = 1.0
    small_fraction: float = 0.1
    regime: Regime = Regime.FROZEN

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        for name in ("labeled_fraction", "small_fraction"):
            if not 0 < getattr(self, name) <= 1:
                raise InvalidConfig(f"{name} must be in (0, 1]")


@dataclass(frozen=True)
class RunConfig:
    gen: GenConfig = field(default_factory=GenConfig)
    counts: tuple = (600, 200, 200)
    dims: ModelDims = field(default_factory=ModelDims)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    eval: EvalSettings = field(default_factory=EvalSettings)
    seed: int = 0
    output_dir: str = "runs"

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if self.dims.d_in != self.gen.d_in:
            object.__setattr__(self, "dims", replace(self.dims, d_in=self.gen.d_in))

    def to_dict(self) -> dict:
        return {
            "gen": self.gen.to_dict(),
            "counts": list(self.counts),
            "dims": asdict(self.dims),
            "pretrain": self.pretrain.to_dict(),
            "probe": {**asdict(self.probe), "thresholds": list(self.probe.thresholds)},
            "eval": {**asdict(self.eval), "regime": self.eval.regime.value},
            "seed": self.seed,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        base = cls()
        return cls(
            gen=_sub(GenConfig, base.gen, d.get("gen")),
            counts=tuple(d.get("counts", base.counts)),
            dims=_sub(ModelDims, base.dims, d.get("dims")),
            pretrain=_sub(PretrainConfig, base.pretrain, d.get("pretrain")),
            probe=_sub(ProbeConfig, base.probe, d.get("probe")),
            eval=_sub(EvalSettings, base.eval, d.get("eval")),
            seed=int(d.get("seed", base.seed)),
            output_dir=str(d.get("output_dir", base.output_dir)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        """Digest of everything that shapes results (the output location is excluded)."""
        d = self.to_dict()
        d.pop("output_dir")
        return digest_of(d)


def _sub(kind, default, overrides):
    if not overrides:
        return default
    names = {f.name for f in fields(kind)}
    unknown = set(overrides) - names
    if unknown:
        raise InvalidConfig(f"unknown {kind.__name__} keys: {sorted(unknown)}")
    return replace(default, **overrides)
