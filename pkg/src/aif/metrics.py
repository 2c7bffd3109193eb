"""Evaluation metrics: structural similarity, style and sentiment gaps,
estimator accuracy, and inter-rater agreement coefficients."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .features import FeatureBackbone, SentimentConfig, sentiment_vector
from .images import to_numpy_hwc
from .losses import style_loss

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 7
SHALLOW_LEVELS = 2


def _window_means(x: np.ndarray) -> np.ndarray:
    view = np.lib.stride_tricks.sliding_window_view(x, (SSIM_WINDOW, SSIM_WINDOW))
    return view.mean(axis=(-2, -1))


def ssim(a, b) -> float:
    """Mean structural similarity over valid 7x7 windows, averaged over RGB.

    Covariance and variance share one code path, so ssim(x, x) is exactly 1.
    """
    a = to_numpy_hwc(a)
    b = to_numpy_hwc(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels per side")
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    values = []
    for ch in range(3):
        x, y = a[:, :, ch], b[:, :, ch]
        mx, my = _window_means(x), _window_means(y)
        var_x = _window_means(x * x) - mx * mx
        var_y = _window_means(y * y) - my * my
        cov = _window_means(x * y) - mx * my
        num = (2 * mx * my + c1) * (2 * cov + c2)
        den = (mx * mx + my * my + c1) * (var_x + var_y + c2)
        values.append((num / den).mean())
    return float(np.mean(values))


def shallow_style_difference(a, b, backbone: FeatureBackbone) -> float:
    """Feature-statistics gap over the first two pyramid levels."""
    with torch.no_grad():
        la = backbone(_chw(a))[:SHALLOW_LEVELS]
        lb = backbone(_chw(b))[:SHALLOW_LEVELS]
        return float(style_loss(la, lb))


def _chw(image) -> torch.Tensor:
    arr = np.array(to_numpy_hwc(image), dtype=np.float32)
    return torch.from_numpy(arr).permute(2, 0, 1)


def sentiment_gap(out_image, anchor_image, backbone: FeatureBackbone, config: SentimentConfig | None = None) -> float:
    """Euclidean distance between the two sentiment vectors."""
    config = config or SentimentConfig()
    with torch.no_grad():
        v_out = sentiment_vector(to_numpy_hwc(out_image), backbone, config)
        v_acr = sentiment_vector(to_numpy_hwc(anchor_image), backbone, config)
        return float(torch.linalg.vector_norm(v_out - v_acr))


def ensemble_accuracy(outputs, labels, ensemble) -> float:
    """Fraction of images whose ensemble argmax matches the label."""
    outputs = list(outputs)
    labels = list(labels)
    if not outputs:
        raise ValueError("no images to score")
    if len(outputs) != len(labels):
        raise ValueError(f"{len(outputs)} images but {len(labels)} labels")
    hits = 0
    for image, label in zip(outputs, labels):
        if ensemble.distribution(image).argmax == label:
            hits += 1
    return hits / len(outputs)


def cohen_kappa(r1, r2) -> float:
    """Chance-corrected agreement between two raters' label sequences."""
    r1 = list(r1)
    r2 = list(r2)
    if len(r1) != len(r2):
        raise ValueError(f"rating lengths differ: {len(r1)} vs {len(r2)}")
    if not r1:
        raise ValueError("need at least one rating")
    n = len(r1)
    p_o = sum(a == b for a, b in zip(r1, r2)) / n
    c1 = Counter(r1)
    c2 = Counter(r2)
    p_e = sum(c1[label] / n * c2.get(label, 0) / n for label in c1)
    if p_e == 1.0:
        raise ValueError("expected agreement is 1; kappa undefined")
    return (p_o - p_e) / (1.0 - p_e)


def fleiss_kappa(ratings) -> float:
    """Agreement for an item-by-category count matrix with equal rater counts."""
    table = np.asarray(ratings, dtype=np.float64)
    if table.ndim != 2 or table.shape[0] < 1:
        raise ValueError("ratings must be a non-empty 2-D count matrix")
    if np.any(table < 0) or np.any(table != np.rint(table)):
        raise ValueError("ratings must be non-negative integer counts")
    raters = table.sum(axis=1)
    n = raters[0]
    if n < 2:
        raise ValueError("need at least two raters per item")
    if np.any(raters != n):
        raise ValueError("every item must have the same number of raters")
    p_i = ((table**2).sum(axis=1) - n) / (n * (n - 1))
    p_bar = p_i.mean()
    p_j = table.sum(axis=0) / table.sum()
    p_e = float((p_j**2).sum())
    if 1.0 - p_e == 0.0:
        raise ValueError("expected agreement is 1; kappa undefined")
    return float((p_bar - p_e) / (1.0 - p_e))


@dataclass(frozen=True)
class EvalReport:
    """The four reported metrics over an evaluation set."""

    ssim: float
    ssd: float
    sg: float
    eacc: float

    def __post_init__(self):
        if not 0.0 <= self.eacc <= 1.0:
            raise ValueError("eacc must lie in [0, 1]")

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @staticmethod
    def load(path) -> "EvalReport":
        return EvalReport(**json.loads(Path(path).read_text(encoding="utf-8")))


def evaluate_pairs(outputs, contents, anchors, labels, ensemble) -> EvalReport:
    """Aggregate the four metrics over aligned output/content/anchor triples."""
    outputs = list(outputs)
    contents = list(contents)
    anchors = list(anchors)
    labels = list(labels)
    if not (len(outputs) == len(contents) == len(anchors) == len(labels)):
        raise ValueError("outputs, contents, anchors, and labels must align")
    backbone = ensemble.backbone
    ssims = [ssim(o, c) for o, c in zip(outputs, contents)]
    ssds = [shallow_style_difference(o, a, backbone) for o, a in zip(outputs, anchors)]
    sgs = [sentiment_gap(o, a, backbone, ensemble.sentiment_config) for o, a in zip(outputs, anchors)]
    eacc = ensemble_accuracy(outputs, labels, ensemble)
    return EvalReport(
        ssim=float(np.mean(ssims)),
        ssd=float(np.mean(ssds)),
        sg=float(np.mean(sgs)),
        eacc=eacc,
    )
