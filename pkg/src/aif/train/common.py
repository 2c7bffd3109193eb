"""Shared trainer plumbing: batching, rng capture, manifests, loss logs."""

from __future__ import annotations

import json
import platform
from pathlib import Path

import numpy as np
import torch

from ..config import TrainConfig


def batch_tensors(records, indices):
    """Stack content/anchor images and pick one description per record."""
    content = torch.stack(
        [torch.from_numpy(np.array(records[i].content, dtype=np.float32)).permute(2, 0, 1) for i in indices]
    )
    anchor = torch.stack(
        [torch.from_numpy(np.array(records[i].sample.image, dtype=np.float32)).permute(2, 0, 1) for i in indices]
    )
    return content, anchor


def pick_descriptions(records, indices, rng: np.random.Generator) -> list:
    out = []
    for i in indices:
        descriptions = records[i].sample.descriptions
        out.append(descriptions[int(rng.integers(0, len(descriptions)))])
    return out


def rng_state_arrays(rng: np.random.Generator) -> tuple:
    """(arrays, meta) fragments capturing numpy and torch generator state."""
    torch_state = torch.get_rng_state().numpy().astype(np.uint8)
    return {"rng.torch": torch_state}, {"rng.numpy": rng.bit_generator.state}


def restore_rng_state(arrays: dict, meta: dict, rng: np.random.Generator) -> None:
    torch.set_rng_state(torch.from_numpy(arrays["rng.torch"].copy()))
    state = dict(meta["rng.numpy"])
    state["state"] = dict(state["state"])
    rng.bit_generator.state = state


def write_manifest(out_dir, model_name: str, config: TrainConfig, extra: dict | None = None) -> None:
    from .. import __version__

    payload = {
        "model": model_name,
        "config": config.as_flat_dict(),
        "versions": {
            "package": __version__,
            "torch": torch.__version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    if extra:
        payload.update(extra)
    path = Path(out_dir) / "manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_manifest(model_dir) -> dict:
    return json.loads((Path(model_dir) / "manifest.json").read_text(encoding="utf-8"))


class LossLog:
    """Append-only JSONL loss log that also keeps rows in memory."""

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self.rows = []
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "a", encoding="utf-8")
        else:
            self._fh = None

    def append(self, row: dict) -> None:
        self.rows.append(row)
        if self._fh is not None:
            self._fh.write(json.dumps(row, sort_keys=True) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def check_finite(value: float, step: int, name: str) -> None:
    if not np.isfinite(value):
        raise RuntimeError(f"{name} diverged to {value} at step {step}")
