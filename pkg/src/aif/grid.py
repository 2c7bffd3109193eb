"""Composite comparison grids: rows of images with caption strips."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .images import load_image, to_numpy_hwc

CELL_GAP = 4
CAPTION_HEIGHT = 16
MARGIN = 8


def emit_grid(rows, out_path) -> None:
    """Render rows of (caption, images...) into one PNG.

    Every image within a row must share a size; rows may differ. Output
    bytes are deterministic for fixed inputs.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("grid needs at least one row")
    prepared = []
    for caption, images in rows:
        if not images:
            raise ValueError("grid rows need at least one image")
        arrays = [to_numpy_hwc(img) for img in images]
        first = arrays[0].shape
        for arr in arrays[1:]:
            if arr.shape != first:
                raise ValueError(f"row images differ in size: {arr.shape} vs {first}")
        prepared.append((str(caption), arrays))

    row_widths = [
        MARGIN * 2 + len(arrays) * arrays[0].shape[1] + (len(arrays) - 1) * CELL_GAP
        for _, arrays in prepared
    ]
    width = max(row_widths)
    height = MARGIN + sum(
        arrays[0].shape[0] + CAPTION_HEIGHT + MARGIN for _, arrays in prepared
    )
    canvas = Image.new("RGB", (width, height), (255, 255, 255))
    draw = ImageDraw.Draw(canvas)
    y = MARGIN
    for caption, arrays in prepared:
        x = MARGIN
        for arr in arrays:
            data = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
            canvas.paste(Image.fromarray(data, mode="RGB"), (x, y))
            x += arr.shape[1] + CELL_GAP
        draw.text((MARGIN, y + arrays[0].shape[0] + 2), caption, fill=(0, 0, 0))
        y += arrays[0].shape[0] + CAPTION_HEIGHT + MARGIN
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    canvas.save(out_path, format="PNG")


def emit_grid_from_spec(spec_path, out_path) -> None:
    """Spec file: JSON list of {"caption": str, "images": [paths]} rows.

    Relative image paths resolve against the spec file's directory.
    """
    spec_path = Path(spec_path)
    rows = json.loads(spec_path.read_text(encoding="utf-8"))
    if not isinstance(rows, list):
        raise ValueError("grid spec must be a JSON list of rows")
    loaded = []
    for row in rows:
        images = [load_image(spec_path.parent / p) for p in row["images"]]
        loaded.append((row.get("caption", ""), images))
    emit_grid(loaded, out_path)
