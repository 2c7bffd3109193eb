"""Accuracy-weighted voting ensemble of per-perspective emotion classifiers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from ..checkpoint import load_checkpoint, load_module_arrays, module_arrays, save_checkpoint
from ..emotions import N_CATEGORIES, EmotionDistribution
from ..images import as_hwc_tensor, hwc_to_chw
from .backbone import FeatureBackbone
from .descriptors import (
    GlcmConfig,
    PatchConfig,
    SentimentConfig,
    color_histogram,
    glcm_features,
    patch_features,
    sentiment_vectors_from_levels,
)

PERSPECTIVES = ("color", "texture", "style", "patch")
HIDDEN_WIDTH = 64


@dataclass(frozen=True)
class EnsembleWeights:
    """Per-classifier validation accuracies used as voting weights."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if np.any(w < 0):
            raise ValueError("ensemble weights must be non-negative")
        if w.sum() <= 0:
            raise ValueError("ensemble weights must have positive sum")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)


def ensemble_distribution(image, estimators, weights: EnsembleWeights) -> EmotionDistribution:
    """Weighted per-category average of per-perspective distributions."""
    if len(estimators) != len(weights.w):
        raise ValueError(
            f"{len(estimators)} estimators but {len(weights.w)} weights"
        )
    acc = np.zeros(N_CATEGORIES, dtype=np.float64)
    for estimator, w in zip(estimators, weights.w):
        acc += w * estimator(image).probs
    return EmotionDistribution(acc / weights.w.sum())


class PerspectiveClassifier(nn.Module):
    """Single-hidden-layer estimator from one feature vector to 8 categories."""

    def __init__(self, in_features: int, seed: int = 0):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        self.fc1 = nn.Linear(in_features, HIDDEN_WIDTH)
        self.fc2 = nn.Linear(HIDDEN_WIDTH, N_CATEGORIES)
        for layer in (self.fc1, self.fc2):
            layer.weight.data.normal_(0.0, layer.in_features**-0.5, generator=gen)
            layer.bias.data.zero_()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(torch.tanh(self.fc1(x)))

    def distribution(self, x: torch.Tensor) -> torch.Tensor:
        return torch.softmax(self.forward(x), dim=-1)


class EmotionEnsemble:
    """Backbone, four perspective classifiers, and their voting weights.

    The color and texture perspectives are not differentiable; they enter the
    forward value as constants while gradients flow through style and patch.
    """

    def __init__(
        self,
        backbone: FeatureBackbone,
        classifiers: dict,
        weights: EnsembleWeights,
        sentiment_config: SentimentConfig | None = None,
        glcm_config: GlcmConfig | None = None,
        patch_config: PatchConfig | None = None,
        histogram_bins: int = 16,
        patch_seed: int = 0,
    ):
        missing = [p for p in PERSPECTIVES if p not in classifiers]
        if missing:
            raise ValueError(f"missing classifiers for perspectives: {missing}")
        if len(weights.w) != len(PERSPECTIVES):
            raise ValueError(f"expected {len(PERSPECTIVES)} weights")
        self.backbone = backbone
        self.classifiers = classifiers
        self.weights = weights
        self.sentiment_config = sentiment_config or SentimentConfig()
        self.glcm_config = glcm_config or GlcmConfig()
        self.patch_config = patch_config or PatchConfig()
        self.histogram_bins = histogram_bins
        self.patch_seed = patch_seed

    def feature_sizes(self) -> dict:
        from .backbone import STAGE_CHANNELS

        return {
            "color": 3 * self.histogram_bins,
            "texture": 4 * len(self.glcm_config.offsets),
            "style": self.sentiment_config.length,
            "patch": STAGE_CHANNELS[-1],
        }

    def _nondiff_distributions(self, image) -> dict:
        color = torch.from_numpy(color_histogram(image, self.histogram_bins))
        texture = torch.from_numpy(glcm_features(image, self.glcm_config))
        out = {}
        with torch.no_grad():
            for name, feats in (("color", color), ("texture", texture)):
                clf = self.classifiers[name]
                dtype = clf.fc1.weight.dtype
                out[name] = clf.distribution(feats.to(dtype))
        return out

    def distribution_torch(self, image, include_nondiff: bool = True) -> torch.Tensor:
        """Differentiable ensemble distribution for one (H, W, 3) image."""
        t = as_hwc_tensor(image, dtype=None if isinstance(image, torch.Tensor) else torch.float32)
        levels = self.backbone(hwc_to_chw(t).unsqueeze(0))
        style_vec = sentiment_vectors_from_levels(levels, self.backbone, self.sentiment_config)
        style = self.classifiers["style"].distribution(style_vec).squeeze(0)
        rng = np.random.default_rng(self.patch_seed)
        crops = patch_features(t, rng, self.patch_config, self.backbone)
        patch = self.classifiers["patch"].distribution(crops).mean(dim=0)
        parts = {"style": style, "patch": patch}
        names = list(PERSPECTIVES)
        if include_nondiff:
            parts.update(self._nondiff_distributions(t))
        else:
            names = ["style", "patch"]
        widx = {name: i for i, name in enumerate(PERSPECTIVES)}
        total = sum(self.weights.w[widx[n]] for n in names)
        acc = sum(
            float(self.weights.w[widx[n]]) * parts[n].to(style.dtype) for n in names
        )
        return acc / total

    def distribution(self, image) -> EmotionDistribution:
        """Full four-perspective distribution as a plain numpy simplex point."""
        with torch.no_grad():
            probs = self.distribution_torch(image, include_nondiff=True)
        probs = probs.detach().cpu().double().numpy()
        return EmotionDistribution(probs / probs.sum())

    def estimators(self) -> list:
        """Per-perspective callables image -> EmotionDistribution, in order."""

        def single(name):
            def run(image):
                t = as_hwc_tensor(image, dtype=None if isinstance(image, torch.Tensor) else torch.float32)
                with torch.no_grad():
                    if name in ("color", "texture"):
                        probs = self._nondiff_distributions(t)[name]
                    elif name == "style":
                        levels = self.backbone(hwc_to_chw(t).unsqueeze(0))
                        vec = sentiment_vectors_from_levels(levels, self.backbone, self.sentiment_config)
                        probs = self.classifiers["style"].distribution(vec).squeeze(0)
                    else:
                        rng = np.random.default_rng(self.patch_seed)
                        crops = patch_features(t, rng, self.patch_config, self.backbone)
                        probs = self.classifiers["patch"].distribution(crops).mean(dim=0)
                probs = probs.detach().cpu().double().numpy()
                return EmotionDistribution(probs / probs.sum())

            return run

        return [single(name) for name in PERSPECTIVES]

    def save(self, path) -> None:
        arrays = {"weights": np.asarray(self.weights.w)}
        arrays.update(module_arrays(self.backbone, "backbone."))
        for name in PERSPECTIVES:
            arrays.update(module_arrays(self.classifiers[name], f"clf.{name}."))
        meta = {
            "kind": "emotion_ensemble",
            "sentiment": {"n_gram": self.sentiment_config.n_gram, "n_lev": self.sentiment_config.n_lev},
            "glcm": {"levels": self.glcm_config.levels, "offsets": [list(o) for o in self.glcm_config.offsets]},
            "patch": {"size": self.patch_config.size, "count": self.patch_config.count},
            "histogram_bins": self.histogram_bins,
            "patch_seed": self.patch_seed,
        }
        save_checkpoint(path, arrays, meta)

    @staticmethod
    def load(path) -> "EmotionEnsemble":
        arrays, meta = load_checkpoint(path)
        backbone = FeatureBackbone()
        load_module_arrays(backbone, arrays, "backbone.")
        sentiment = SentimentConfig(**meta["sentiment"])
        glcm = GlcmConfig(meta["glcm"]["levels"], tuple(tuple(o) for o in meta["glcm"]["offsets"]))
        patch = PatchConfig(**meta["patch"])
        ensemble = EmotionEnsemble.__new__(EmotionEnsemble)
        sizes = {
            "color": 3 * meta["histogram_bins"],
            "texture": 4 * len(glcm.offsets),
            "style": sentiment.length,
            "patch": arrays["clf.patch.fc1.weight"].shape[1],
        }
        classifiers = {}
        for name in PERSPECTIVES:
            clf = PerspectiveClassifier(sizes[name])
            load_module_arrays(clf, arrays, f"clf.{name}.")
            classifiers[name] = clf
        EmotionEnsemble.__init__(
            ensemble,
            backbone,
            classifiers,
            EnsembleWeights(arrays["weights"]),
            sentiment,
            glcm,
            patch,
            meta["histogram_bins"],
            meta["patch_seed"],
        )
        return ensemble
