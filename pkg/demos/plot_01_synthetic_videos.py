"""
Synthetic videos with a hidden transition
=========================================

Each synthetic video is a walk of an 8-dimensional latent state, observed
through a fixed random linear map. Partway through, the walk changes regime:
new heading, faster steps. Nothing jumps at that instant, so the change only
shows up in how consecutive clips relate to each other.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from intentlab.datamodel import extract_eval_clips
from intentlab.synthgen import GenConfig, generate_dataset

OUT = Path(__file__).with_name("_output")
OUT.mkdir(exist_ok=True)

###########################################################################
# Generate a small dataset. The pretraining split keeps its annotations
# internally, but the view handed to pretraining has them stripped.

cfg = GenConfig(seed=0)
ds = generate_dataset(cfg, counts=(50, 20, 20))
print("splits:", len(ds.pretrain), len(ds.train), len(ds.test))
print("pretrain view annotated?", any(v.transition is not None for v in ds.pretrain_view()))

video = ds.train[0]
print(f"{video.id}: {video.n_clips} clips, {video.end_time:.0f} s, transition at {video.transition:.2f} s")

###########################################################################
# Evaluation clips tile the video every 0.25 s. Each gets one of three
# labels depending on where it sits relative to the transition.

clips = extract_eval_clips(video)
print("".join("ITU"[int(label)] for _, label in clips))

###########################################################################
# Step length between consecutive clips in feature space. It jumps after
# the transition, which is what a good representation has to pick up.

steps = np.linalg.norm(np.diff(video.features, axis=0), axis=1)
fig, ax = plt.subplots(figsize=(6, 3))
ax.plot(np.arange(1, video.n_clips), steps, marker="o")
ax.axvline(video.transition, color="k", linestyle="--", label="transition")
ax.set_xlabel("time (s)")
ax.set_ylabel("feature step length")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "synthetic_steps.png", dpi=100)

###########################################################################
# Locality: neighbouring clips look more alike than clips further apart.

def mean_cos(f, lag):
    a, b = f[:-lag], f[lag:]
    return np.mean(np.sum(a * b, 1) / np.linalg.norm(a, axis=1) / np.linalg.norm(b, axis=1))

for lag in (1, 3, 5):
    print(f"mean cosine at lag {lag}: {np.mean([mean_cos(v.features, lag) for v in ds.pretrain]):.3f}")
