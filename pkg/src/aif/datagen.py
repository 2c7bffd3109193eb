"""Synthetic anchor corpus: procedural scenes rendered twice.

Each scene is a smooth scalar field. The content rendering is the field as
neutral grayscale; the anchor rendering maps it through a category duotone
palette and adds a category texture overlay, so labels are recoverable from
color statistics alone while content structure is shared across the pair.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .emotions import (
    CATEGORY_NAMES,
    EmotionCategory,
    EmotionDistribution,
    category,
)
from .images import load_image, save_image
from .text import load_emotion_words

# (dark, light) duotone anchors per category, spread for mean-RGB separability.
PALETTES = {
    "amusement": ((0.45, 0.30, 0.05), (1.00, 0.95, 0.45)),
    "awe": ((0.15, 0.05, 0.45), (0.65, 0.60, 1.00)),
    "contentment": ((0.05, 0.35, 0.10), (0.70, 1.00, 0.70)),
    "excitement": ((0.55, 0.10, 0.05), (1.00, 0.65, 0.30)),
    "anger": ((0.30, 0.00, 0.00), (0.95, 0.25, 0.20)),
    "disgust": ((0.20, 0.25, 0.00), (0.65, 0.70, 0.25)),
    "fear": ((0.00, 0.00, 0.10), (0.40, 0.45, 0.55)),
    "sadness": ((0.10, 0.15, 0.30), (0.55, 0.65, 0.85)),
}

SCENE_NOUNS = (
    "valley",
    "harbor",
    "forest",
    "meadow",
    "street",
    "shoreline",
    "mountain",
    "garden",
)

DESCRIPTION_TEMPLATES = (
    "a {kw1} {noun} under a {kw2} sky",
    "this {noun} feels {kw1} and {kw2}",
    "{kw1} light over a {kw2} {noun}",
    "a painting of a {noun} full of {kw1} {kw2} color",
)

ONEHOT_WEIGHT = 0.6
SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class AnchorSample:
    """One labelled anchor image with its text descriptions."""

    image: np.ndarray
    descriptions: tuple
    label: EmotionCategory
    distribution: EmotionDistribution

    def __post_init__(self):
        image = np.asarray(self.image, dtype=np.float64)
        if image.ndim != 3 or image.shape[2] != 3:
            raise ValueError(f"expected an (H, W, 3) image, got {image.shape}")
        if image.min() < 0 or image.max() > 1:
            raise ValueError("image values must lie in [0, 1]")
        if not 1 <= len(self.descriptions) <= 5:
            raise ValueError("need between 1 and 5 descriptions")
        if self.distribution.argmax != self.label:
            raise ValueError("distribution must peak at the label")
        image.setflags(write=False)
        object.__setattr__(self, "image", image)
        object.__setattr__(self, "descriptions", tuple(self.descriptions))


@dataclass(frozen=True)
class DatasetRecord:
    """Anchor sample plus its paired neutral content rendering."""

    id: str
    sample: AnchorSample
    content: np.ndarray


def _scene_field(resolution: int, rng: np.random.Generator) -> np.ndarray:
    """Smooth structured scalar field, rescaled to mean 0.5."""
    ys, xs = np.mgrid[0:resolution, 0:resolution] / resolution
    angle = rng.uniform(0, 2 * math.pi)
    field = 0.35 * (math.cos(angle) * xs + math.sin(angle) * ys)
    for _ in range(int(rng.integers(2, 5))):
        cx, cy = rng.uniform(0.1, 0.9, size=2)
        radius = rng.uniform(0.08, 0.3)
        sign = 1.0 if rng.integers(0, 2) else -1.0
        field += sign * 0.5 * np.exp(-(((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * radius**2)))
    if rng.integers(0, 2):
        x0, x1 = sorted(rng.uniform(0.1, 0.9, size=2))
        y0, y1 = sorted(rng.uniform(0.1, 0.9, size=2))
        box = ((xs >= x0) & (xs <= x1) & (ys >= y0) & (ys <= y1)).astype(np.float64)
        field += 0.3 * box
    span = field.max() - field.min()
    if span > 0:
        field = (field - field.min()) / span
    field = field - field.mean() + 0.5
    return np.clip(field, 0.0, 1.0)


def _texture_overlay(name: str, resolution: int, rng: np.random.Generator) -> np.ndarray:
    """Category-specific additive overlay in roughly [-0.15, 0.15]."""
    ys, xs = np.mgrid[0:resolution, 0:resolution] / resolution
    if name == "amusement":
        dots = np.sin(2 * math.pi * 6 * xs) * np.sin(2 * math.pi * 6 * ys)
        return 0.12 * np.clip(dots, 0, 1)
    if name == "awe":
        return 0.12 * np.sin(2 * math.pi * 1.5 * xs + rng.uniform(0, math.pi))
    if name == "contentment":
        return 0.10 * np.sin(2 * math.pi * 2 * ys + rng.uniform(0, math.pi))
    if name == "excitement":
        return 0.14 * np.sign(np.sin(2 * math.pi * 8 * (xs + ys)))
    if name == "anger":
        hatch = np.sign(np.sin(2 * math.pi * 10 * (xs - ys)))
        return 0.15 * hatch * rng.choice([0.6, 1.0], size=hatch.shape)
    if name == "disgust":
        blotch = rng.normal(size=(resolution // 4, resolution // 4))
        return 0.13 * np.kron(blotch, np.ones((4, 4)))[:resolution, :resolution].clip(-1, 1)
    if name == "fear":
        speckle = (rng.random((resolution, resolution)) < 0.05).astype(np.float64)
        vignette = ((xs - 0.5) ** 2 + (ys - 0.5) ** 2) * 0.5
        return -0.2 * speckle - 0.3 * vignette
    if name == "sadness":
        return -0.10 * np.clip(np.sin(2 * math.pi * 1.2 * ys), 0, 1)
    raise ValueError(f"no texture family for category {name!r}")


def render_pair(label: EmotionCategory, resolution: int, rng: np.random.Generator):
    """(content, anchor) images for one fresh procedural scene."""
    field = _scene_field(resolution, rng)
    content = np.repeat(field[:, :, None], 3, axis=2)
    dark, light = (np.asarray(c) for c in PALETTES[label.name])
    anchor = dark[None, None, :] + field[:, :, None] * (light - dark)[None, None, :]
    anchor = anchor + _texture_overlay(label.name, resolution, rng)[:, :, None]
    return content, np.clip(anchor, 0.0, 1.0)


def _category_keywords() -> dict:
    grouped = {name: [] for name in CATEGORY_NAMES}
    for word, cat in load_emotion_words().items():
        grouped[cat.name].append(word)
    return {name: sorted(words) for name, words in grouped.items()}


def make_descriptions(label: EmotionCategory, rng: np.random.Generator, keywords: dict) -> tuple:
    """2-3 templated descriptions naming the category's lexicon words."""
    words = keywords[label.name]
    count = int(rng.integers(2, 4))
    picks = rng.choice(len(DESCRIPTION_TEMPLATES), size=count, replace=False)
    out = []
    for idx in picks:
        kw1, kw2 = (words[i] for i in rng.choice(len(words), size=2, replace=False))
        noun = SCENE_NOUNS[int(rng.integers(0, len(SCENE_NOUNS)))]
        out.append(DESCRIPTION_TEMPLATES[idx].format(kw1=kw1, kw2=kw2, noun=noun))
    return tuple(out)


def jittered_distribution(label: EmotionCategory, rng: np.random.Generator) -> EmotionDistribution:
    """Peaked mixture of the label one-hot with Dirichlet noise."""
    onehot = EmotionDistribution.delta(label).probs
    noise = rng.dirichlet(np.ones(len(CATEGORY_NAMES)))
    return EmotionDistribution(ONEHOT_WEIGHT * onehot + (1.0 - ONEHOT_WEIGHT) * noise)


def generate_samples(per_category: int, seed: int, resolution: int = 64) -> dict:
    """Split name -> DatasetRecord list, deterministic in the seed."""
    if per_category < 8:
        raise ValueError("need at least 8 samples per category")
    rng = np.random.default_rng(seed)
    keywords = _category_keywords()
    n_holdout = max(1, per_category // 8)
    splits = {name: [] for name in SPLIT_NAMES}
    for name in CATEGORY_NAMES:
        label = category(name)
        for idx in range(per_category):
            content, anchor = render_pair(label, resolution, rng)
            sample = AnchorSample(
                image=anchor,
                descriptions=make_descriptions(label, rng, keywords),
                label=label,
                distribution=jittered_distribution(label, rng),
            )
            record = DatasetRecord(id=f"{name}_{idx:04d}", sample=sample, content=content)
            if idx < per_category - 2 * n_holdout:
                splits["train"].append(record)
            elif idx < per_category - n_holdout:
                splits["val"].append(record)
            else:
                splits["test"].append(record)
    return splits


def write_dataset(splits: dict, out_dir) -> None:
    """Write the on-disk layout: per split, images/ plus meta.jsonl."""
    out_dir = Path(out_dir)
    for split_name in SPLIT_NAMES:
        split_dir = out_dir / split_name
        (split_dir / "images").mkdir(parents=True, exist_ok=True)
        lines = []
        for record in sorted(splits[split_name], key=lambda r: r.id):
            save_image(split_dir / "images" / f"{record.id}.png", record.sample.image)
            content_name = f"{record.id}_content.png"
            save_image(split_dir / "images" / content_name, record.content)
            lines.append(
                json.dumps(
                    {
                        "id": record.id,
                        "label": record.sample.label.name,
                        "distribution": [float(p) for p in record.sample.distribution.probs],
                        "descriptions": list(record.sample.descriptions),
                        "content": content_name,
                    },
                    sort_keys=True,
                )
            )
        (split_dir / "meta.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")


def generate_synthetic_dataset(out_dir, per_category: int, seed: int, resolution: int = 64) -> dict:
    """Generate and persist the corpus; returns the in-memory splits."""
    splits = generate_samples(per_category, seed, resolution)
    write_dataset(splits, out_dir)
    return splits


def load_split(data_dir, split_name: str) -> list:
    """Read one split back; content falls back to anchor luma when absent."""
    split_dir = Path(data_dir) / split_name
    meta_path = split_dir / "meta.jsonl"
    if not meta_path.is_file():
        raise FileNotFoundError(f"no meta.jsonl under {split_dir}")
    records = []
    for line in meta_path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        meta = json.loads(line)
        anchor = load_image(split_dir / "images" / f"{meta['id']}.png")
        if "content" in meta:
            content = load_image(split_dir / "images" / meta["content"])
        else:
            luma = anchor @ np.array([0.299, 0.587, 0.114])
            content = np.repeat(luma[:, :, None], 3, axis=2)
        sample = AnchorSample(
            image=anchor,
            descriptions=tuple(meta["descriptions"]),
            label=category(meta["label"]),
            distribution=EmotionDistribution(np.asarray(meta["distribution"])),
        )
        records.append(DatasetRecord(id=meta["id"], sample=sample, content=content))
    return records


def load_dataset(data_dir) -> dict:
    return {name: load_split(data_dir, name) for name in SPLIT_NAMES}
