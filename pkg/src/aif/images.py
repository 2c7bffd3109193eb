"""Image array helpers shared across the package.

Public interfaces exchange images as (H, W, 3) float arrays or tensors in
[0, 1]; convolutional code works on channel-first tensors internally.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image


def as_hwc_tensor(image, dtype=None) -> torch.Tensor:
    """Coerce an (H, W, 3) image (numpy or torch) to a float tensor."""
    if isinstance(image, torch.Tensor):
        t = image
        if dtype is not None:
            t = t.to(dtype)
        elif not t.is_floating_point():
            t = t.to(torch.float32)
    else:
        arr = np.ascontiguousarray(image)
        if not arr.flags.writeable:
            arr = arr.copy()
        t = torch.from_numpy(arr).to(dtype or torch.float32)
    if t.ndim != 3 or t.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {tuple(t.shape)}")
    return t


def hwc_to_chw(image: torch.Tensor) -> torch.Tensor:
    return image.permute(2, 0, 1)


def chw_to_hwc(image: torch.Tensor) -> torch.Tensor:
    return image.permute(1, 2, 0)


def to_numpy_hwc(image) -> np.ndarray:
    """Detach to a float64 numpy (H, W, 3) array."""
    if isinstance(image, torch.Tensor):
        image = image.detach().cpu().numpy()
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {arr.shape}")
    return arr


def load_image(path) -> np.ndarray:
    """Read a PNG/JPEG into a float64 (H, W, 3) array in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def save_image(path, image) -> None:
    """Write an (H, W, 3) float image in [0, 1] as an 8-bit PNG."""
    arr = to_numpy_hwc(image)
    data = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(data, mode="RGB").save(path, format="PNG")
