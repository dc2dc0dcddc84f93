"""
Pretrain, then probe
====================

Pretrain an encoder on unlabeled videos, then freeze it and fit a linear
probe on labeled clips. The probe drives three downstream tasks: clip
classification, locating the transition, and anticipating the label 1.5 s
ahead. A randomly initialized encoder serves as the control.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from intentlab.evaluation import (
    Regime, anticipate, classification_clips, classify, fit_probe, localization_accuracy, localize,
    random_localization_baseline,
)
from intentlab.nncore.model import ModelDims
from intentlab.synthgen import GenConfig, generate_dataset
from intentlab.training import PretrainConfig, init_model, pretrain

OUT = Path(__file__).with_name("_output")
OUT.mkdir(exist_ok=True)

###########################################################################
# A shorter schedule than the default keeps this demo to well under a minute.

ds = generate_dataset(GenConfig(seed=0), counts=(300, 100, 100))
dims = ModelDims()
params, rows = pretrain(ds.pretrain_view(), dims, PretrainConfig(steps=800), seed=0)
print("first/last loss:", rows[0]["l_total"], rows[-1]["l_total"])

fig, ax = plt.subplots(figsize=(6, 3))
ax.plot([r["l_total"] for r in rows], linewidth=0.8)
ax.set_xlabel("step")
ax.set_ylabel("total loss")
fig.tight_layout()
fig.savefig(OUT / "pretrain_loss.png", dpi=100)

###########################################################################
# Frozen linear probes on the pretrained and the scratch encoders.

train = classification_clips(ds.train)
x_test, y_test = classification_clips(ds.test).stacked()
print(f"random localization baseline within 1 s: {random_localization_baseline(ds.test, 1.0):.3f}")

for name, enc in (("pretrained", params), ("scratch", init_model(dims, seed=0))):
    probe, _ = fit_probe(enc, train, Regime.FROZEN, 1.0, np.random.default_rng(0))
    _, acc = classify(probe, enc, x_test, y_test)
    locs = [localize(probe, enc, v) for v in ds.test]
    ant, _, _ = anticipate(enc, ds.train, ds.test, Regime.FROZEN, np.random.default_rng(1))
    print(f"{name:>10}: classification {acc:.3f}, localization within 1 s "
          f"{localization_accuracy(locs, 1.0):.3f}, within 0.25 s {localization_accuracy(locs, 0.25):.3f}, "
          f"anticipation {ant:.3f}")

###########################################################################
# Transitional probability along one test video.

from intentlab.datamodel import clip_features, extract_eval_clips
from intentlab.evaluation import predict_proba

probe, _ = fit_probe(params, train, Regime.FROZEN, 1.0, np.random.default_rng(0))
video = ds.test[0]
clips = extract_eval_clips(video)
probs = predict_proba(probe, params, clip_features(video, [c.start for c, _ in clips]))
fig, ax = plt.subplots(figsize=(6, 3))
ax.plot([c.center for c, _ in clips], probs, label=["intentional", "transitional", "unintentional"])
ax.axvline(video.transition, color="k", linestyle="--")
ax.set_xlabel("clip center (s)")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(OUT / "transition_scores.png", dpi=100)
