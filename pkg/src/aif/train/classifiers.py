"""Perspective classifier training and validation-accuracy voting weights."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from ..features import (
    EmotionEnsemble,
    EnsembleWeights,
    FeatureBackbone,
    GlcmConfig,
    PatchConfig,
    PerspectiveClassifier,
    SentimentConfig,
    color_histogram,
    glcm_features,
    patch_features,
    sentiment_vector,
)
from ..features.ensemble import PERSPECTIVES

CLASSIFIER_LR = 0.01


def extract_features(
    records,
    backbone: FeatureBackbone,
    sentiment_config: SentimentConfig,
    glcm_config: GlcmConfig,
    patch_config: PatchConfig,
    histogram_bins: int,
    patch_seed: int,
) -> dict:
    """Per-perspective feature tensors; patch features keep a crop axis."""
    color, texture, style, patch, labels = [], [], [], [], []
    with torch.no_grad():
        for record in records:
            image = torch.from_numpy(np.array(record.sample.image, dtype=np.float32))
            color.append(color_histogram(image, histogram_bins))
            texture.append(glcm_features(image, glcm_config))
            style.append(sentiment_vector(image, backbone, sentiment_config).numpy())
            rng = np.random.default_rng(patch_seed)
            patch.append(patch_features(image, rng, patch_config, backbone).numpy())
            labels.append(record.sample.label.wheel_position)
    return {
        "color": torch.tensor(np.stack(color), dtype=torch.float32),
        "texture": torch.tensor(np.stack(texture), dtype=torch.float32),
        "style": torch.tensor(np.stack(style), dtype=torch.float32),
        "patch": torch.tensor(np.stack(patch), dtype=torch.float32),
        "labels": torch.tensor(labels, dtype=torch.long),
    }


def _fit_classifier(x: torch.Tensor, y: torch.Tensor, steps: int, seed: int) -> PerspectiveClassifier:
    clf = PerspectiveClassifier(x.shape[-1], seed=seed)
    opt = torch.optim.Adam(clf.parameters(), lr=CLASSIFIER_LR)
    for _ in range(steps):
        opt.zero_grad()
        loss = F.cross_entropy(clf(x), y)
        loss.backward()
        opt.step()
    return clf


def _predictions(name: str, clf: PerspectiveClassifier, feats: dict) -> torch.Tensor:
    with torch.no_grad():
        x = feats[name]
        if name == "patch":
            probs = torch.softmax(clf(x.reshape(-1, x.shape[-1])), dim=-1)
            probs = probs.reshape(x.shape[0], x.shape[1], -1).mean(dim=1)
        else:
            probs = torch.softmax(clf(x), dim=-1)
    return probs.argmax(dim=-1)


def accuracy_weights(classifiers: dict, val_feats: dict) -> EnsembleWeights:
    """Top-1 validation accuracy of each classifier, in perspective order."""
    labels = val_feats["labels"]
    if labels.numel() == 0:
        raise ValueError("validation split is empty")
    accs = []
    for name in PERSPECTIVES:
        pred = _predictions(name, classifiers[name], val_feats)
        accs.append(float((pred == labels).float().mean()))
    return EnsembleWeights(np.array(accs))


def train_ensemble(
    train_records,
    val_records,
    steps: int = 300,
    seed: int = 0,
    histogram_bins: int = 16,
    patch_seed: int = 0,
) -> EmotionEnsemble:
    """Fit all four perspective classifiers and weight them by accuracy."""
    if not train_records:
        raise ValueError("training split is empty")
    backbone = FeatureBackbone()
    sentiment_config = SentimentConfig()
    glcm_config = GlcmConfig()
    patch_config = PatchConfig()
    train_feats = extract_features(
        train_records, backbone, sentiment_config, glcm_config, patch_config, histogram_bins, patch_seed
    )
    val_feats = extract_features(
        val_records, backbone, sentiment_config, glcm_config, patch_config, histogram_bins, patch_seed
    )
    labels = train_feats["labels"]
    classifiers = {}
    for i, name in enumerate(PERSPECTIVES):
        x = train_feats[name]
        if name == "patch":
            y = labels.repeat_interleave(x.shape[1])
            x = x.reshape(-1, x.shape[-1])
        else:
            y = labels
        classifiers[name] = _fit_classifier(x, y, steps, seed + i)
    weights = accuracy_weights(classifiers, val_feats)
    return EmotionEnsemble(
        backbone,
        classifiers,
        weights,
        sentiment_config,
        glcm_config,
        patch_config,
        histogram_bins,
        patch_seed,
    )


def fit_ensemble_weights(ensemble: EmotionEnsemble, records) -> EnsembleWeights:
    """Re-derive voting weights from per-perspective accuracy on records."""
    if not records:
        raise ValueError("validation split is empty")
    feats = extract_features(
        records,
        ensemble.backbone,
        ensemble.sentiment_config,
        ensemble.glcm_config,
        ensemble.patch_config,
        ensemble.histogram_bins,
        ensemble.patch_seed,
    )
    return accuracy_weights(ensemble.classifiers, feats)
