"""Fixed convolutional feature backbone and multi-level pyramids."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..images import as_hwc_tensor, hwc_to_chw

STAGE_CHANNELS = (16, 32, 64)
STAGE_STRIDES = (2, 2, 2)
PROJECTION_CHANNELS = 16


@dataclass
class FeaturePyramid:
    """Per-level feature maps with strictly non-increasing spatial sizes."""

    levels: list

    def __post_init__(self):
        sizes = [lvl.shape[-2] * lvl.shape[-1] for lvl in self.levels]
        if any(a < b for a, b in zip(sizes, sizes[1:])):
            raise ValueError("pyramid spatial sizes must be non-increasing")

    def __len__(self) -> int:
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)


class FeatureBackbone(nn.Module):
    """Three bias-free convolutional stages tapped after every stage.

    Weights are fixed after seeded initialization and never trained; tanh
    keeps the feature path smooth so finite-difference gradient checks on
    downstream losses stay well conditioned.
    """

    def __init__(self, seed: int = 0):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        stages = []
        projections = []
        in_ch = 3
        for out_ch, stride in zip(STAGE_CHANNELS, STAGE_STRIDES):
            conv = nn.Conv2d(in_ch, out_ch, kernel_size=3, stride=stride, padding=1, bias=False)
            conv.weight.data.normal_(0.0, (9 * in_ch) ** -0.5, generator=gen)
            stages.append(conv)
            proj = nn.Conv2d(out_ch, PROJECTION_CHANNELS, kernel_size=1, bias=False)
            proj.weight.data.normal_(0.0, out_ch**-0.5, generator=gen)
            projections.append(proj)
            in_ch = out_ch
        self.stages = nn.ModuleList(stages)
        self.projections = nn.ModuleList(projections)
        for param in self.parameters():
            param.requires_grad_(False)

    @property
    def n_levels(self) -> int:
        return len(self.stages)

    @property
    def total_stride(self) -> int:
        stride = 1
        for s in STAGE_STRIDES:
            stride *= s
        return stride

    def forward(self, x: torch.Tensor) -> list:
        """Feature maps after every stage for (B, 3, H, W) or (3, H, W) input."""
        levels = []
        for conv in self.stages:
            x = torch.tanh(conv(x))
            levels.append(x)
        return levels

    def project(self, level_index: int, feature: torch.Tensor) -> torch.Tensor:
        """Apply the per-level 1x1 projection used by sentiment vectors."""
        return self.projections[level_index](feature)


def extract_feature_pyramid(image, backbone: FeatureBackbone) -> FeaturePyramid:
    """Run a single (H, W, 3) image through the backbone.

    Image height and width must be divisible by the backbone's total stride.
    """
    t = as_hwc_tensor(image, dtype=None if isinstance(image, torch.Tensor) else torch.float32)
    h, w = t.shape[0], t.shape[1]
    stride = backbone.total_stride
    if h % stride or w % stride:
        raise ValueError(
            f"image size {h}x{w} must be divisible by the backbone stride {stride}"
        )
    levels = backbone(hwc_to_chw(t).unsqueeze(0))
    return FeaturePyramid([lvl.squeeze(0) for lvl in levels])
