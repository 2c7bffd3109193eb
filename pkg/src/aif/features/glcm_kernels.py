"""Co-occurrence counting kernels for GLCM texture features.

The accumulation loop is the one hot numpy-side inner loop in the package, so
it ships in two interchangeable forms: a numba-compiled kernel (default) and
a pure-numpy fallback. Set AIF_DISABLE_NUMBA=1 to force the numpy path.
"""

from __future__ import annotations

import os

import numpy as np


def _env_disables_numba() -> bool:
    return os.environ.get("AIF_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")


def cooccurrence_numpy(levels: np.ndarray, dy: int, dx: int, q: int) -> np.ndarray:
    """Count quantized-level pairs at one offset with vectorized numpy."""
    h, w = levels.shape
    y0, y1 = max(0, -dy), min(h, h - dy)
    x0, x1 = max(0, -dx), min(w, w - dx)
    if y0 >= y1 or x0 >= x1:
        return np.zeros((q, q), dtype=np.float64)
    src = levels[y0:y1, x0:x1]
    dst = levels[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
    flat = src.ravel() * q + dst.ravel()
    counts = np.bincount(flat, minlength=q * q).astype(np.float64)
    return counts.reshape(q, q)


try:  # pragma: no cover - exercised through the dispatcher
    from numba import njit

    @njit(cache=True)
    def _cooccurrence_jit(levels, dy, dx, q):
        h, w = levels.shape
        out = np.zeros((q, q), dtype=np.float64)
        y0 = -dy if dy < 0 else 0
        y1 = h - dy if dy > 0 else h
        x0 = -dx if dx < 0 else 0
        x1 = w - dx if dx > 0 else w
        for y in range(y0, y1):
            for x in range(x0, x1):
                out[levels[y, x], levels[y + dy, x + dx]] += 1.0
        return out

    def cooccurrence_numba(levels: np.ndarray, dy: int, dx: int, q: int) -> np.ndarray:
        return _cooccurrence_jit(levels, dy, dx, q)

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    cooccurrence_numba = None
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and not _env_disables_numba()


def cooccurrence(levels: np.ndarray, dy: int, dx: int, q: int) -> np.ndarray:
    """Dispatch to the active kernel; both paths produce identical counts."""
    if USE_NUMBA:
        return cooccurrence_numba(levels, dy, dx, q)
    return cooccurrence_numpy(levels, dy, dx, q)
