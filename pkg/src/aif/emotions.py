"""Emotion wheel geometry: categories, distances, distributions, and tuple sampling.

The eight categories sit on a circular wheel with the four positive emotions
on positions 0-3 and the four negative ones on positions 4-7, so that every
category has exactly one opposite at distance 4 and two neighbours at
distance 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CATEGORY_NAMES = (
    "amusement",
    "awe",
    "contentment",
    "excitement",
    "anger",
    "disgust",
    "fear",
    "sadness",
)
N_CATEGORIES = 8
POSITIVE_NAMES = CATEGORY_NAMES[:4]
NEGATIVE_NAMES = CATEGORY_NAMES[4:]

# Distribution entries must sum to one within this tolerance.
SUM_TOL = 1e-9
# Estimated probabilities are clamped here before the log inside KL.
KL_EPS = 1e-8


@dataclass(frozen=True)
class EmotionCategory:
    """One of the eight wheel emotions, identified by name and wheel position."""

    name: str
    wheel_position: int

    def __post_init__(self):
        if self.name not in CATEGORY_NAMES:
            raise ValueError(f"unknown emotion category: {self.name!r}")
        if CATEGORY_NAMES[self.wheel_position] != self.name:
            raise ValueError(
                f"wheel position {self.wheel_position} does not belong to {self.name!r}"
            )

    @property
    def is_positive(self) -> bool:
        return self.wheel_position < 4


WHEEL = tuple(EmotionCategory(name, i) for i, name in enumerate(CATEGORY_NAMES))
_BY_NAME = {c.name: c for c in WHEEL}


def category(name: str) -> EmotionCategory:
    """Look up a category by its lowercase name."""
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ValueError(f"unknown emotion category: {name!r}") from None


class DistributionError(ValueError):
    """Raised for malformed emotion distributions."""


@dataclass(frozen=True)
class EmotionDistribution:
    """Point on the 8-category probability simplex."""

    probs: np.ndarray

    def __post_init__(self):
        # Copy so freezing the instance never freezes the caller's buffer.
        probs = np.array(self.probs, dtype=np.float64)
        if probs.shape != (N_CATEGORIES,):
            raise DistributionError(
                f"expected {N_CATEGORIES} probabilities, got shape {probs.shape}"
            )
        if np.any(probs < 0):
            raise DistributionError("probabilities must be non-negative")
        if abs(float(probs.sum()) - 1.0) > SUM_TOL:
            raise DistributionError(f"probabilities sum to {probs.sum()}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def argmax(self) -> EmotionCategory:
        return WHEEL[int(np.argmax(self.probs))]

    @staticmethod
    def uniform() -> "EmotionDistribution":
        return EmotionDistribution(np.full(N_CATEGORIES, 1.0 / N_CATEGORIES))

    @staticmethod
    def delta(cat: EmotionCategory) -> "EmotionDistribution":
        p = np.zeros(N_CATEGORIES)
        p[cat.wheel_position] = 1.0
        return EmotionDistribution(p)


@dataclass(frozen=True)
class EmotionTuple:
    """Seed / positive / related / negative categories for metric learning."""

    sed: EmotionCategory
    pos: EmotionCategory
    rel: EmotionCategory
    neg: EmotionCategory

    def __post_init__(self):
        if wheel_distance(self.sed, self.pos) != 0:
            raise ValueError("positive sample must share the seed region")
        if wheel_distance(self.sed, self.rel) != 1:
            raise ValueError("related sample must be a wheel neighbour of the seed")
        if wheel_distance(self.sed, self.neg) != 4:
            raise ValueError("negative sample must be opposite the seed")


def wheel_distance(a: EmotionCategory, b: EmotionCategory) -> int:
    """Minimum number of steps between two categories along the wheel."""
    d = abs(a.wheel_position - b.wheel_position)
    return min(d, N_CATEGORIES - d)


def kl_divergence(target: EmotionDistribution, estimate: EmotionDistribution) -> float:
    """KL divergence sum_i d_i ln(d_i / est_i) with 0*ln(0) = 0.

    Estimate entries are clamped below by KL_EPS before the log.
    """
    total = 0.0
    for d, e in zip(target.probs, estimate.probs):
        if d > 0.0:
            total += d * math.log(d / max(e, KL_EPS))
    return total


def sample_emotion_tuple(sed: EmotionCategory, rng: np.random.Generator) -> EmotionTuple:
    """Draw a (seed, positive, related, negative) tuple around a seed category.

    The positive sample shares the seed region, the related sample is chosen
    uniformly between the two wheel neighbours, and the negative sample sits
    at the opposite wheel position.
    """
    p = sed.wheel_position
    left = WHEEL[(p - 1) % N_CATEGORIES]
    right = WHEEL[(p + 1) % N_CATEGORIES]
    rel = left if rng.integers(0, 2) == 0 else right
    neg = WHEEL[(p + 4) % N_CATEGORIES]
    return EmotionTuple(sed=sed, pos=sed, rel=rel, neg=neg)


def normalize_counts(counts) -> EmotionDistribution:
    """Build a distribution proportional to 8 non-negative annotation counts."""
    counts = np.asarray(counts, dtype=np.float64)
    if counts.shape != (N_CATEGORIES,):
        raise DistributionError(
            f"expected {N_CATEGORIES} counts, got shape {counts.shape}"
        )
    if np.any(counts < 0):
        raise DistributionError("counts must be non-negative")
    total = counts.sum()
    if total == 0:
        raise DistributionError("at least one count must be positive")
    return EmotionDistribution(counts / total)
