"""Emotion-conditioned image filtering: wheel geometry, affect-aware text
processing, perceptual emotion estimation, and two trainable filter models."""

__version__ = "0.1.0"

from .emotions import (
    CATEGORY_NAMES,
    EmotionCategory,
    EmotionDistribution,
    EmotionTuple,
    category,
    kl_divergence,
    sample_emotion_tuple,
    wheel_distance,
)
from .losses import LossWeights

__all__ = [
    "__version__",
    "CATEGORY_NAMES",
    "EmotionCategory",
    "EmotionDistribution",
    "EmotionTuple",
    "category",
    "kl_divergence",
    "sample_emotion_tuple",
    "wheel_distance",
    "LossWeights",
]
