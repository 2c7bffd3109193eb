"""Versioned binary checkpoint container.

Layout: 8-byte magic ``AIFCHKPT``, little-endian uint32 format version,
little-endian uint64 header length, a UTF-8 JSON header carrying arbitrary
metadata plus the shape table, then the raw little-endian C-contiguous array
payloads in table order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"AIFCHKPT"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    """Raised for unreadable or incompatible checkpoint files."""


def save_checkpoint(path, arrays: dict, meta: dict | None = None) -> None:
    """Write named arrays plus JSON-serializable metadata to ``path``."""
    path = Path(path)
    table = []
    payloads = []
    offset = 0
    for name, arr in arrays.items():
        # ascontiguousarray promotes 0-d to 1-d; keep the caller's shape.
        shape = list(np.shape(arr))
        arr = np.ascontiguousarray(arr)
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        data = arr.tobytes()
        table.append(
            {
                "name": name,
                "dtype": arr.dtype.str,
                "shape": shape,
                "offset": offset,
                "nbytes": len(data),
            }
        )
        payloads.append(data)
        offset += len(data)
    header = json.dumps({"meta": meta or {}, "arrays": table}, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for data in payloads:
            fh.write(data)


def load_checkpoint(path) -> tuple[dict, dict]:
    """Read a checkpoint, returning ``(arrays, meta)``."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"{path}: bad magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        blob = fh.read()
    arrays = {}
    for entry in header["arrays"]:
        start = entry["offset"]
        end = start + entry["nbytes"]
        arr = np.frombuffer(blob[start:end], dtype=np.dtype(entry["dtype"]))
        arrays[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return arrays, header["meta"]


def module_arrays(module, prefix: str = "") -> dict:
    """Flatten a torch module state dict into named numpy arrays."""
    return {
        prefix + name: tensor.detach().cpu().numpy()
        for name, tensor in module.state_dict().items()
    }


def load_module_arrays(module, arrays: dict, prefix: str = "") -> None:
    """Restore a torch module from arrays produced by :func:`module_arrays`."""
    import torch

    state = {}
    for name, tensor in module.state_dict().items():
        key = prefix + name
        if key not in arrays:
            raise CheckpointError(f"missing checkpoint entry {key!r}")
        state[name] = torch.from_numpy(np.array(arrays[key])).to(tensor.dtype)
    module.load_state_dict(state)


def optimizer_arrays(optimizer, prefix: str = "opt.") -> dict:
    """Flatten torch optimizer state (per-parameter tensors) into arrays."""
    out = {}
    state = optimizer.state_dict()["state"]
    for pid, pstate in state.items():
        for key, value in pstate.items():
            name = f"{prefix}{pid}.{key}"
            if hasattr(value, "detach"):
                out[name] = value.detach().cpu().numpy()
            else:
                out[name] = np.asarray(value)
    return out


def load_optimizer_arrays(optimizer, arrays: dict, prefix: str = "opt.") -> None:
    """Restore optimizer state saved by :func:`optimizer_arrays`.

    The optimizer must already reference the same parameters in the same
    order as when the state was saved.
    """
    import torch

    state_dict = optimizer.state_dict()
    groups = state_dict["param_groups"]
    state = {}
    pids = [pid for group in groups for pid in group["params"]]
    for pid in pids:
        pstate = {}
        want = f"{prefix}{pid}."
        for name, arr in arrays.items():
            if name.startswith(want):
                key = name[len(want):]
                tensor = torch.from_numpy(np.array(arr))
                pstate[key] = tensor
        if pstate:
            state[pid] = pstate
    state_dict["state"] = state
    optimizer.load_state_dict(state_dict)
