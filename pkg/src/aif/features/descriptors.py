"""Image descriptors: Gram matrices, sentiment vectors, histograms, GLCM
texture statistics, and random patch features."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from ..images import as_hwc_tensor, hwc_to_chw, to_numpy_hwc
from .backbone import PROJECTION_CHANNELS, FeatureBackbone
from .glcm_kernels import cooccurrence

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def gram_matrix(feature: torch.Tensor) -> torch.Tensor:
    """G = F F^T / (H W) for a (C, H, W) map, batched over leading dims."""
    if feature.ndim not in (3, 4):
        raise ValueError(f"expected (C, H, W) or (B, C, H, W), got {tuple(feature.shape)}")
    h, w = feature.shape[-2], feature.shape[-1]
    if h * w < 1:
        raise ValueError("feature map must have non-empty spatial extent")
    flat = feature.reshape(*feature.shape[:-2], h * w)
    return torch.matmul(flat, flat.transpose(-1, -2)) / (h * w)


@dataclass(frozen=True)
class SentimentConfig:
    """Number of Gram elements per level and of tapped backbone levels."""

    n_gram: int = 32
    n_lev: int = 3

    def __post_init__(self):
        limit = PROJECTION_CHANNELS * (PROJECTION_CHANNELS + 1) // 2
        if not 1 <= self.n_gram <= limit:
            raise ValueError(
                f"n_gram must be in [1, {limit}] for {PROJECTION_CHANNELS} projected channels"
            )

    @property
    def length(self) -> int:
        return self.n_gram * self.n_lev


def sentiment_vectors_from_levels(
    levels: list, backbone: FeatureBackbone, config: SentimentConfig
) -> torch.Tensor:
    """Sentiment vectors (B, n_gram * n_lev) from batched backbone levels."""
    if config.n_lev > len(levels):
        raise ValueError(f"backbone taps {len(levels)} levels, config wants {config.n_lev}")
    rows, cols = torch.triu_indices(PROJECTION_CHANNELS, PROJECTION_CHANNELS)
    rows, cols = rows[: config.n_gram], cols[: config.n_gram]
    parts = []
    for i in range(config.n_lev):
        gram = gram_matrix(backbone.project(i, levels[i]))
        parts.append(gram[..., rows, cols])
    return torch.cat(parts, dim=-1)


def sentiment_vector(image, backbone: FeatureBackbone, config: SentimentConfig | None = None) -> torch.Tensor:
    """Concatenated upper-triangular Gram elements across projected levels.

    Elements are taken in row-major order, diagonal included, after a 1x1
    projection at each tapped level.
    """
    config = config or SentimentConfig()
    t = as_hwc_tensor(image, dtype=None if isinstance(image, torch.Tensor) else torch.float32)
    levels = backbone(hwc_to_chw(t).unsqueeze(0))
    return sentiment_vectors_from_levels(levels, backbone, config).squeeze(0)


def color_histogram(image, bins: int = 16) -> np.ndarray:
    """Per-channel normalized histograms over [0, 1], concatenated R, G, B.

    The top bin is right-closed: value 1.0 lands in bin ``bins - 1``.
    """
    if bins < 2:
        raise ValueError("need at least 2 histogram bins")
    arr = to_numpy_hwc(image)
    out = np.empty(3 * bins, dtype=np.float64)
    n = arr.shape[0] * arr.shape[1]
    for c in range(3):
        idx = np.clip(np.floor(arr[:, :, c] * bins).astype(np.int64), 0, bins - 1)
        counts = np.bincount(idx.ravel(), minlength=bins).astype(np.float64)
        out[c * bins : (c + 1) * bins] = counts / n
    return out


@dataclass(frozen=True)
class GlcmConfig:
    """Quantization levels and pixel offsets for co-occurrence statistics."""

    levels: int = 8
    offsets: tuple = ((0, 1), (1, 0))

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("need at least 2 quantization levels")
        if not self.offsets:
            raise ValueError("need at least one offset")


def quantize_gray(image, levels: int) -> np.ndarray:
    """Luma grayscale conversion quantized to integer levels in [0, levels)."""
    arr = to_numpy_hwc(image)
    gray = arr[:, :, 0] * LUMA_WEIGHTS[0] + arr[:, :, 1] * LUMA_WEIGHTS[1] + arr[:, :, 2] * LUMA_WEIGHTS[2]
    return np.clip(np.floor(gray * levels).astype(np.int64), 0, levels - 1)


def glcm_matrix(quantized: np.ndarray, offset, levels: int) -> np.ndarray:
    """Symmetric, normalized co-occurrence matrix for one offset."""
    dy, dx = offset
    h, w = quantized.shape
    if abs(dy) >= h or abs(dx) >= w:
        raise ValueError(f"offset {offset} exceeds image extent {h}x{w}")
    counts = cooccurrence(quantized, dy, dx, levels)
    sym = counts + counts.T
    total = sym.sum()
    if total == 0:
        raise ValueError(f"offset {offset} produces no pixel pairs")
    return sym / total


def glcm_properties(matrix: np.ndarray) -> tuple:
    """(contrast, energy, homogeneity, correlation) of one normalized GLCM.

    Correlation degenerates to 1.0 when either marginal variance vanishes.
    """
    q = matrix.shape[0]
    i = np.arange(q, dtype=np.float64)[:, None]
    j = np.arange(q, dtype=np.float64)[None, :]
    contrast = float((matrix * (i - j) ** 2).sum())
    energy = float((matrix**2).sum())
    homogeneity = float((matrix / (1.0 + (i - j) ** 2)).sum())
    mu_i = float((matrix * i).sum())
    mu_j = float((matrix * j).sum())
    var_i = float((matrix * (i - mu_i) ** 2).sum())
    var_j = float((matrix * (j - mu_j) ** 2).sum())
    if var_i <= 0.0 or var_j <= 0.0:
        correlation = 1.0
    else:
        correlation = float((matrix * (i - mu_i) * (j - mu_j)).sum() / np.sqrt(var_i * var_j))
    return contrast, energy, homogeneity, correlation


def glcm_features(image, config: GlcmConfig | None = None) -> np.ndarray:
    """Texture statistics per offset, concatenated in offset order."""
    config = config or GlcmConfig()
    quantized = quantize_gray(image, config.levels)
    out = []
    for offset in config.offsets:
        out.extend(glcm_properties(glcm_matrix(quantized, offset, config.levels)))
    return np.asarray(out, dtype=np.float64)


@dataclass(frozen=True)
class PatchConfig:
    """Crop size and count for the patch feature perspective."""

    size: int = 16
    count: int = 4

    def __post_init__(self):
        if self.size < 1 or self.count < 1:
            raise ValueError("patch size and count must be positive")


def patch_features(
    image,
    rng: np.random.Generator,
    config: PatchConfig,
    backbone: FeatureBackbone,
) -> torch.Tensor:
    """Mean-pooled final-level features of uniformly placed square crops.

    Crop coordinates are drawn from ``rng``; gradients flow through the
    image, not through the placement.
    """
    t = as_hwc_tensor(image, dtype=None if isinstance(image, torch.Tensor) else torch.float32)
    h, w = t.shape[0], t.shape[1]
    p = config.size
    if p > min(h, w):
        raise ValueError(f"patch size {p} exceeds image extent {h}x{w}")
    ys = rng.integers(0, h - p + 1, size=config.count)
    xs = rng.integers(0, w - p + 1, size=config.count)
    crops = torch.stack(
        [hwc_to_chw(t[y : y + p, x : x + p, :]) for y, x in zip(ys, xs)]
    )
    final = backbone(crops)[-1]
    return final.mean(dim=(-2, -1))
