"""Self-supervised temporal representation learning for intentional/unintentional action prediction.

A numpy laboratory: synthetic videos with a latent transition, triplet
sampling, temporal contrastive and order losses on a small reverse-mode
autodiff core, and linear-probe downstream protocols.
"""
from .datamodel import ClipSpec, IntentLabel, Split, VideoRecord, label_clip
from .losses import LossMode, total_loss
from .sampling import NegativeScope, Triplet
from .synthgen import GenConfig, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "ClipSpec", "IntentLabel", "Split", "VideoRecord", "label_clip", "LossMode", "total_loss",
    "NegativeScope", "Triplet", "GenConfig", "generate_dataset",
]
