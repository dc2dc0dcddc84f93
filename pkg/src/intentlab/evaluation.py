"""Downstream protocols: linear-probe classification, localization, anticipation."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .datamodel import (
    CLIP_SECONDS,
    IntentLabel,
    anticipation_pairs,
    clip_features,
    extract_eval_clips,
)
from .errors import InvalidConfig, MissingAnnotation, MissingClass, NoValidPairs
from .nncore import engine as E
from .nncore.model import LeafParams, ModelParams, encode
from .nncore.optim import OptimState, opt_step

log = logging.getLogger(__name__)

N_CLASSES = len(IntentLabel)


class Regime(str, enum.Enum):
    FROZEN = "Frozen"
    FINETUNED = "Finetuned"


@dataclass(frozen=True)
class ProbeConfig:
    steps: int = 500
    lr: float = 0.05
    encoder_lr: float = 0.005
    stride: float = 0.25
    window: float = CLIP_SECONDS
    horizon: float = 1.5
    thresholds: tuple = (1.0, 0.25)

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if self.steps < 0 or not self.lr > 0 or not self.encoder_lr > 0:
            raise InvalidConfig("probe steps must be >= 0 and learning rates > 0")


@dataclass(frozen=True, eq=False)
class ProbeParams:
    weight: np.ndarray
    bias: np.ndarray

    @classmethod
    def zeros(cls, d_f: int) -> "ProbeParams":
        return cls(np.zeros((d_f, N_CLASSES)), np.zeros(N_CLASSES))

    def logits(self, feats: np.ndarray) -> np.ndarray:
        return feats @ self.weight + self.bias


@dataclass(frozen=True, eq=False)
class ClipSet:
    """Raw clip features and targets, grouped by video."""

    video_ids: tuple
    features: tuple
    labels: tuple

    def __len__(self):
        return len(self.video_ids)

    def subset(self, idx) -> "ClipSet":
        return ClipSet(tuple(self.video_ids[i] for i in idx), tuple(self.features[i] for i in idx),
                       tuple(self.labels[i] for i in idx))

    def stacked(self):
        if not self.features:
            return np.zeros((0, 0)), np.zeros(0, dtype=np.int64)
        return np.concatenate(self.features), np.concatenate(self.labels).astype(np.int64)


@dataclass
class EvalMetrics:
    cls_accuracy: float
    loc_accuracy_at: dict
    ant_accuracy: float
    regime: Regime
    labeled_fraction: float
    seed: int
    config_digest: str
    extra: dict = field(default_factory=dict)

    def row(self) -> dict:
        out = {
            "cls_accuracy": self.cls_accuracy,
            "loc_accuracy_at": {f"{k:g}": v for k, v in sorted(self.loc_accuracy_at.items(), reverse=True)},
            "ant_accuracy": self.ant_accuracy,
            "regime": Regime(self.regime).value,
            "labeled_fraction": self.labeled_fraction,
            "seed": self.seed,
            "config_digest": self.config_digest,
        }
        out.update(self.extra)
        return out


# ---------------------------------------------------------------------------
# clip sets


def classification_clips(videos, stride: float = 0.25, window: float = CLIP_SECONDS) -> ClipSet:
    ids, feats, labels = [], [], []
    for v in videos:
        clips = extract_eval_clips(v, stride, window)
        ids.append(v.id)
        feats.append(clip_features(v, [c.start for c, _ in clips]))
        labels.append(np.array([int(lab) for _, lab in clips], dtype=np.int64))
    return ClipSet(tuple(ids), tuple(feats), tuple(labels))


def anticipation_clips(videos, horizon: float = 1.5, stride: float = 0.25,
                       window: float = CLIP_SECONDS) -> ClipSet:
    """Current-clip features paired with the label ``horizon`` seconds ahead."""
    ids, feats, labels = [], [], []
    for v in videos:
        pairs = anticipation_pairs(extract_eval_clips(v, stride, window), horizon, stride)
        if not pairs:
            continue
        ids.append(v.id)
        feats.append(clip_features(v, [c.start for c, _ in pairs]))
        labels.append(np.array([int(lab) for _, lab in pairs], dtype=np.int64))
    if not ids:
        raise NoValidPairs(f"no clip has a successor {horizon:g} s ahead")
    return ClipSet(tuple(ids), tuple(feats), tuple(labels))


# ---------------------------------------------------------------------------
# probe fitting


def select_videos(n_videos: int, labeled_fraction: float, rng: np.random.Generator) -> np.ndarray:
    if not 0 < labeled_fraction <= 1:
        raise InvalidConfig(f"labeled_fraction must be in (0, 1], got {labeled_fraction}")
    if labeled_fraction == 1:
        return np.arange(n_videos)
    count = max(1, int(round(labeled_fraction * n_videos)))
    return np.sort(rng.choice(n_videos, size=count, replace=False))


def balance_indices(labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Resample every class with replacement up to the majority-class count.

    Each class keeps all of its own samples and tops up with uniform draws, so
    realized per-class counts are exactly equal.
    """
    labels = np.asarray(labels)
    present = [c for c in range(N_CLASSES) if np.any(labels == c)]
    target = max(int(np.sum(labels == c)) for c in present)
    parts = []
    for c in present:
        idx = np.flatnonzero(labels == c)
        extra = rng.choice(idx, size=target - idx.size, replace=True) if target > idx.size else idx[:0]
        parts.append(np.concatenate([idx, extra]))
    return np.concatenate(parts)


def _standardizer(feats):
    mu = feats.mean(axis=0)
    sd = feats.std(axis=0)
    sd = np.where(sd > 1e-8, sd, 1.0)
    return mu, sd


def _fold(weight, bias, mu, sd) -> ProbeParams:
    w = weight / sd[:, None]
    return ProbeParams(w, bias - mu @ w)


def fit_probe(encoder: ModelParams, clips: ClipSet, regime: Regime = Regime.FROZEN,
              labeled_fraction: float = 1.0, rng: np.random.Generator | None = None,
              cfg: ProbeConfig = ProbeConfig()):
    """Train a 3-way linear probe on class-balanced clips.

    Returns ``(probe, encoder)``; the encoder is the input object untouched in
    the frozen regime and a fine-tuned copy otherwise. Features are
    standardized during training and the standardization is folded into the
    returned linear map.
    """
    regime = Regime(regime)
    rng = np.random.default_rng(0) if rng is None else rng
    chosen = clips.subset(select_videos(len(clips), labeled_fraction, rng))
    x, y = chosen.stacked()
    missing = [IntentLabel(c).name for c in range(N_CLASSES) if not np.any(y == c)]
    if missing:
        raise MissingClass(f"labeled clips lack classes: {', '.join(missing)}")
    keep = balance_indices(y, rng)
    x, y = x[keep], y[keep]

    feats = encode(encoder, x).value
    mu, sd = _standardizer(feats)
    arrays = {"probe.w": np.zeros((feats.shape[1], N_CLASSES)), "probe.b": np.zeros(N_CLASSES)}
    opt = OptimState(lr=cfg.lr, kind="sgd")

    if regime is Regime.FROZEN:
        z = (feats - mu) / sd
        for _ in range(cfg.steps):
            w, b = E.Value(arrays["probe.w"]), E.Value(arrays["probe.b"])
            loss = E.cross_entropy(E.matmul(E.Value(z), w) + b, y)
            E.backward(loss)
            arrays = opt_step(opt, arrays, {"probe.w": w.grad, "probe.b": b.grad})
        return _fold(arrays["probe.w"], arrays["probe.b"], mu, sd), encoder

    enc_names = [n for n in encoder.arrays if n.startswith("enc.")]
    arrays.update({n: encoder.arrays[n] for n in enc_names})
    lrs = {n: cfg.encoder_lr for n in enc_names}
    for _ in range(cfg.steps):
        leaves = {n: E.Value(a) for n, a in arrays.items()}
        f = encode(LeafParams(leaves, encoder.tau), x)
        z = (f - mu) * (1.0 / sd)
        loss = E.cross_entropy(E.matmul(z, leaves["probe.w"]) + leaves["probe.b"], y)
        E.backward(loss)
        arrays = opt_step(opt, arrays, {n: v.grad for n, v in leaves.items()}, lrs)
    tuned = encoder.with_arrays({n: arrays[n] for n in enc_names})
    return _fold(arrays["probe.w"], arrays["probe.b"], mu, sd), tuned


# ---------------------------------------------------------------------------
# inference


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict_proba(probe: ProbeParams, encoder: ModelParams, raw: np.ndarray) -> np.ndarray:
    return softmax(probe.logits(encode(encoder, raw).value))


def classify(probe: ProbeParams, encoder: ModelParams, raw: np.ndarray, labels=None):
    """Class probabilities per clip and, given labels, argmax accuracy.

    Ties go to the lowest class index.
    """
    probs = predict_proba(probe, encoder, raw)
    if labels is None:
        return probs, None
    labels = np.asarray(labels)
    acc = float(np.mean(np.argmax(probs, axis=1) == labels)) if labels.size else float("nan")
    return probs, acc


@dataclass(frozen=True)
class Localization:
    video_id: str
    t_pred: float
    t_true: float
    correct: dict

    @property
    def error(self) -> float:
        return abs(self.t_pred - self.t_true)


def localize_scores(video, scores: np.ndarray, thresholds=(1.0, 0.25), stride: float = 0.25,
                    window: float = CLIP_SECONDS) -> Localization:
    """Predicted transition = center of the highest-scoring clip (earliest on ties)."""
    if video.transition is None:
        raise MissingAnnotation(f"video {video.id} has no transition annotation")
    clips = extract_eval_clips(video, stride, window)
    best = clips[int(np.argmax(scores))][0]
    t_pred = best.center
    err = abs(t_pred - video.transition)
    return Localization(video.id, t_pred, video.transition, {float(t): bool(err <= t) for t in thresholds})


def localize(probe: ProbeParams, encoder: ModelParams, video, thresholds=(1.0, 0.25),
             stride: float = 0.25, window: float = CLIP_SECONDS) -> Localization:
    if video.transition is None:
        raise MissingAnnotation(f"video {video.id} has no transition annotation")
    clips = extract_eval_clips(video, stride, window)
    probs = predict_proba(probe, encoder, clip_features(video, [c.start for c, _ in clips]))
    return localize_scores(video, probs[:, IntentLabel.TRANSITIONAL], thresholds, stride, window)


def localization_accuracy(results, threshold: float) -> float:
    return float(np.mean([r.correct[float(threshold)] for r in results]))


def random_localization_baseline(videos, threshold: float, stride: float = 0.25,
                                 window: float = CLIP_SECONDS) -> float:
    """Expected accuracy of picking one evaluation clip uniformly at random per video."""
    rates = []
    for v in videos:
        clips = extract_eval_clips(v, stride, window)
        centers = np.array([c.center for c, _ in clips])
        rates.append(np.mean(np.abs(centers - v.transition) <= threshold))
    return float(np.mean(rates))


def anticipate(encoder: ModelParams, train_videos, test_videos, regime: Regime = Regime.FINETUNED,
               rng: np.random.Generator | None = None, cfg: ProbeConfig = ProbeConfig(),
               labeled_fraction: float = 1.0):
    """Fit a probe mapping current clips to future labels and score it on the test videos.

    Returns ``(accuracy, probe, encoder)``.
    """
    train = anticipation_clips(train_videos, cfg.horizon, cfg.stride, cfg.window)
    test = anticipation_clips(test_videos, cfg.horizon, cfg.stride, cfg.window)
    probe, tuned = fit_probe(encoder, train, regime, labeled_fraction, rng, cfg)
    x, y = test.stacked()
    _, acc = classify(probe, tuned, x, y)
    return acc, probe, tuned


# ---------------------------------------------------------------------------
# protocol drivers


def probe_rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(23, tag)))


SETTINGS = (
    ("linear", Regime.FROZEN, "small"),
    ("linear", Regime.FROZEN, "full"),
    ("finetune", Regime.FINETUNED, "full"),
)


def evaluate_representation(encoder: ModelParams, train_videos, test_videos, seed: int,
                            config_digest: str, cfg: ProbeConfig = ProbeConfig(),
                            small_fraction: float = 0.1, representation: str = "pretrained",
                            settings=SETTINGS) -> list[EvalMetrics]:
    """Classification, localization and anticipation for each probe setting.

    Localization reuses the classification probe of the same setting;
    anticipation trains its own probe under the same regime and fraction.
    """
    train = classification_clips(train_videos, cfg.stride, cfg.window)
    test = classification_clips(test_videos, cfg.stride, cfg.window)
    x_test, y_test = test.stacked()
    out = []
    for tag, (_, regime, size) in enumerate(settings):
        fraction = small_fraction if size == "small" else 1.0
        probe, tuned = fit_probe(encoder, train, regime, fraction, probe_rng(seed, tag), cfg)
        _, acc = classify(probe, tuned, x_test, y_test)
        locs = [localize(probe, tuned, v, cfg.thresholds, cfg.stride, cfg.window) for v in test_videos]
        ant, _, _ = anticipate(encoder, train_videos, test_videos, regime, probe_rng(seed, 100 + tag), cfg,
                               fraction)
        out.append(EvalMetrics(
            cls_accuracy=acc,
            loc_accuracy_at={t: localization_accuracy(locs, t) for t in cfg.thresholds},
            ant_accuracy=ant,
            regime=regime,
            labeled_fraction=fraction,
            seed=seed,
            config_digest=config_digest,
            extra={"representation": representation},
        ))
    return out


ABLATION_COLUMNS = ("scope", "loss_mode", "seed", "cls_acc", "loc_acc_1.0", "loc_acc_0.25", "ant_acc", "regime")


@dataclass
class AblationTable:
    rows: list
    summary: list
    direction: dict

    def csv_text(self) -> str:
        import csv
        import io
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(ABLATION_COLUMNS + ("status",))
        for r in self.rows:
            writer.writerow([_fmt(r.get(c)) for c in ABLATION_COLUMNS] + [r["status"]])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return "" if np.isnan(v) else repr(v)
    return "" if v is None else str(v)


def _ablation_cell(job):
    from .training import pretrain
    from dataclasses import replace as _replace

    scope, mode, seed, dataset, dims, pcfg, cfg, train, test, digest = job
    row = {"scope": scope.value, "loss_mode": mode.value, "seed": seed, "regime": Regime.FROZEN.value,
           "config_digest": digest}
    try:
        params, _ = pretrain(dataset.pretrain_view(), dims, _replace(pcfg, scope=scope, mode=mode), seed)
        probe, _ = fit_probe(params, train, Regime.FROZEN, 1.0, probe_rng(seed, 1), cfg)
        x, y = test.stacked()
        _, acc = classify(probe, params, x, y)
        locs = [localize(probe, params, v, cfg.thresholds, cfg.stride, cfg.window) for v in dataset.test]
        ant, _, _ = anticipate(params, dataset.train, dataset.test, Regime.FROZEN, probe_rng(seed, 101), cfg)
        row.update({"cls_acc": acc, "ant_acc": ant, "status": "ok"})
        for t in cfg.thresholds:
            row[loc_key(t)] = localization_accuracy(locs, t)
    except Exception as exc:  # a failed cell must not abort the matrix
        log.warning("ablation cell %s/%s seed %d failed: %s", scope.value, mode.value, seed, exc)
        row.update({"cls_acc": float("nan"), "ant_acc": float("nan"), "loc_acc_1.0": float("nan"),
                    "loc_acc_0.25": float("nan"), "status": f"failed: {type(exc).__name__}: {exc}"})
    return row


def run_ablation_matrix(dataset, grid, seeds, dims, pretrain_cfg, cfg: ProbeConfig = ProbeConfig(),
                        config_digest: str = "", threads: int = 1) -> AblationTable:
    """Pretrain and evaluate one encoder per (scope, loss mode, seed).

    Rows come back in grid-then-seed order whatever the thread count.
    """
    from concurrent.futures import ThreadPoolExecutor

    from .losses import LossMode
    from .sampling import NegativeScope

    grid = [(NegativeScope(s), LossMode(m)) for s, m in grid]
    if not grid:
        raise InvalidConfig("ablation grid is empty")
    train = classification_clips(dataset.train, cfg.stride, cfg.window)
    test = classification_clips(dataset.test, cfg.stride, cfg.window)
    jobs = [(s, m, int(seed), dataset, dims, pretrain_cfg, cfg, train, test, config_digest)
            for s, m in grid for seed in seeds]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_ablation_cell, jobs))
    else:
        rows = [_ablation_cell(j) for j in jobs]
    summary = summarize_ablation(rows)
    return AblationTable(rows, summary, direction_check(summary))


def loc_key(threshold: float) -> str:
    return "loc_acc_1.0" if threshold == 1.0 else f"loc_acc_{threshold:g}"


METRIC_KEYS = ("cls_acc", "loc_acc_1.0", "loc_acc_0.25", "ant_acc")


def summarize_ablation(rows) -> list:
    cells = {}
    for r in rows:
        cells.setdefault((r["scope"], r["loss_mode"]), []).append(r)
    out = []
    for (scope, mode), rs in cells.items():
        ok = [r for r in rs if r["status"] == "ok"]
        entry = {"scope": scope, "loss_mode": mode, "n_ok": len(ok), "n_failed": len(rs) - len(ok)}
        for key in METRIC_KEYS:
            vals = np.array([r[key] for r in ok], dtype=np.float64)
            entry[f"{key}_mean"] = float(vals.mean()) if vals.size else float("nan")
            entry[f"{key}_std"] = float(vals.std()) if vals.size else float("nan")
        out.append(entry)
    return out


def direction_check(summary, tolerance: float = 0.01) -> dict:
    """Does Combined reach the better single-term model minus ``tolerance`` (per scope)?

    Reported, never raised: the ordering is not guaranteed to carry over to
    synthetic data.
    """
    by = {(e["scope"], e["loss_mode"]): e for e in summary}
    out = {}
    for scope in sorted({e["scope"] for e in summary}):
        need = [(scope, m) for m in ("Combined", "TempOnly", "OrdOnly")]
        if not all(k in by for k in need):
            continue
        comb = by[(scope, "Combined")]["cls_acc_mean"]
        best_single = max(by[(scope, "TempOnly")]["cls_acc_mean"], by[(scope, "OrdOnly")]["cls_acc_mean"])
        out[scope] = {"combined": comb, "best_single": best_single, "ok": bool(comb >= best_single - tolerance)}
    return out
