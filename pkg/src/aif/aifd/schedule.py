"""Noise schedule arrays indexed 0..T with the t=0 entries as identities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DiffusionSchedule:
    """Per-step alpha, cumulative alpha_bar, and sampling noise scales."""

    T: int
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("schedule needs at least one timestep")
        alpha = np.asarray(self.alpha, dtype=np.float64)
        alpha_bar = np.asarray(self.alpha_bar, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        for name, arr in (("alpha", alpha), ("alpha_bar", alpha_bar), ("sigma", sigma)):
            if arr.shape != (self.T + 1,):
                raise ValueError(f"{name} must have length T + 1 = {self.T + 1}")
        if alpha[0] != 1.0 or alpha_bar[0] != 1.0:
            raise ValueError("index 0 must carry the identity convention")
        if np.any(alpha <= 0) or np.any(alpha > 1):
            raise ValueError("alpha values must lie in (0, 1]")
        if not np.allclose(np.cumprod(alpha), alpha_bar, rtol=0, atol=1e-12):
            raise ValueError("alpha_bar must equal the cumulative product of alpha")
        if np.any(np.diff(alpha_bar) >= 0):
            raise ValueError("alpha_bar must be strictly decreasing")
        if np.any(sigma < 0):
            raise ValueError("sigma values must be non-negative")
        for arr in (alpha, alpha_bar, sigma):
            arr.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "alpha_bar", alpha_bar)
        object.__setattr__(self, "sigma", sigma)


def linear_schedule(
    T: int = 100,
    beta_start: float = 1e-4,
    beta_end: float = 0.02,
    stochastic: bool = False,
) -> DiffusionSchedule:
    """Linear beta ramp; sigma is zero unless stochastic sampling is asked for.

    The stochastic variant uses the posterior variance
    (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t) * beta_t.
    """
    betas = np.linspace(beta_start, beta_end, T)
    alpha = np.concatenate([[1.0], 1.0 - betas])
    alpha_bar = np.cumprod(alpha)
    sigma = np.zeros(T + 1)
    if stochastic:
        var = (1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:]) * betas
        sigma[1:] = np.sqrt(var)
    return DiffusionSchedule(T=T, alpha=alpha, alpha_bar=alpha_bar, sigma=sigma)
