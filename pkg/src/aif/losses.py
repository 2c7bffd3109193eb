"""Training objectives for both filter models.

All MSE-style terms use mean reduction so the weight values stay meaningful
across resolutions. Statistics-matching terms read the sigma in "mean and
variance" literally as variance, which also keeps them smooth at zero spread.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
import torch

from .emotions import KL_EPS, EmotionDistribution, EmotionTuple, wheel_distance

GAN_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    """Every loss weight, defaulting to the published values."""

    alpha: float = 0.02
    beta: float = 0.01
    lambda_identity_features: float = 0.01
    lambda_content: float = 5.0
    lambda_style: float = 0.3
    lambda_gan: float = 3.0
    lambda_id: float = 2.0
    lambda_ed_b: float = 140.0
    lambda_sm: float = 30.0
    lambda_as_b: float = 600.0
    lambda_ae_b: float = 1.0
    lambda_finetune: float = 0.01
    gamma: float = 0.3
    lambda_dm: float = 1.0
    lambda_tm: float = 0.001
    lambda_ed_d: float = 10.0
    lambda_as_d: float = 10.0
    lambda_ae_d: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"loss weight {f.name} must be non-negative")


def emotional_distribution_loss(
    target: EmotionDistribution,
    image: torch.Tensor,
    ensemble,
    include_nondiff: bool = True,
) -> torch.Tensor:
    """KL divergence from the target distribution to the ensemble estimate.

    Gradients reach the image only through the style and patch perspectives;
    with include_nondiff the histogram and co-occurrence perspectives still
    shape the forward value as constants.
    """
    estimate = ensemble.distribution_torch(image, include_nondiff=include_nondiff)
    t = torch.from_numpy(target.probs.copy()).to(estimate.dtype)
    mask = t > 0
    e = torch.clamp(estimate[mask], min=KL_EPS)
    return (t[mask] * torch.log(t[mask] / e)).sum()


def scaled_sentiment_distance(vi, vj, dist: int):
    """Squared vector distance divided by the wheel distance (clamped to 1)."""
    vi = torch.as_tensor(vi)
    vj = torch.as_tensor(vj)
    if vi.shape != vj.shape:
        raise ValueError(f"sentiment vector shapes differ: {tuple(vi.shape)} vs {tuple(vj.shape)}")
    if dist < 0:
        raise ValueError("wheel distance must be non-negative")
    return ((vi - vj) ** 2).sum() / max(dist, 1)


def sentiment_metric_loss(
    v_sed,
    v_pos,
    v_rel,
    v_neg,
    emotions: EmotionTuple,
    alpha: float = 0.02,
    beta: float = 0.01,
):
    """Double hinge pulling same-region vectors together, neighbours to a
    margin, and opposites beyond both."""
    d_pos = scaled_sentiment_distance(v_sed, v_pos, wheel_distance(emotions.sed, emotions.pos))
    d_rel = scaled_sentiment_distance(v_sed, v_rel, wheel_distance(emotions.sed, emotions.rel))
    d_neg = scaled_sentiment_distance(v_sed, v_neg, wheel_distance(emotions.sed, emotions.neg))
    return torch.clamp(d_pos - d_rel + alpha, min=0.0) + torch.clamp(d_rel - d_neg + beta, min=0.0)


def anchor_sentiment_loss(v_out, v_acr):
    """Mean squared error between output and anchor sentiment vectors."""
    v_out = torch.as_tensor(v_out)
    v_acr = torch.as_tensor(v_acr)
    if v_out.shape != v_acr.shape:
        raise ValueError(f"sentiment vector shapes differ: {tuple(v_out.shape)} vs {tuple(v_acr.shape)}")
    return ((v_out - v_acr) ** 2).mean()


def _levels(pyr) -> list:
    return list(pyr)


def content_loss(pyr_out, pyr_cnt):
    """Sum over levels of the mean squared feature error."""
    out_levels, cnt_levels = _levels(pyr_out), _levels(pyr_cnt)
    if len(out_levels) != len(cnt_levels):
        raise ValueError("pyramids have different level counts")
    total = None
    for a, b in zip(out_levels, cnt_levels):
        if a.shape != b.shape:
            raise ValueError(f"level shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
        term = ((a - b) ** 2).mean()
        total = term if total is None else total + term
    return total


def feature_stat_difference(a: torch.Tensor, b: torch.Tensor):
    """Euclidean gap between per-channel means plus per-channel variances.

    Statistics pool over every non-channel axis, so batched and single maps
    share one code path and spatial shuffles leave the value unchanged.
    """
    a = torch.as_tensor(a)
    b = torch.as_tensor(b)
    if a.dim() not in (3, 4) or b.dim() not in (3, 4):
        raise ValueError("feature maps must be (C, H, W) or (B, C, H, W)")
    ch_a = a.shape[0] if a.dim() == 3 else a.shape[1]
    ch_b = b.shape[0] if b.dim() == 3 else b.shape[1]
    if ch_a != ch_b:
        raise ValueError(f"channel counts differ: {ch_a} vs {ch_b}")

    def stats(x):
        flat = x.reshape(x.shape[0], -1) if x.dim() == 3 else x.movedim(1, 0).reshape(x.shape[1], -1)
        mu = flat.mean(dim=1)
        var = ((flat - mu[:, None]) ** 2).mean(dim=1)
        return mu, var

    mu_a, var_a = stats(a)
    mu_b, var_b = stats(b)
    return torch.linalg.vector_norm(mu_a - mu_b) + torch.linalg.vector_norm(var_a - var_b)


def style_loss(pyr_out, pyr_ref):
    """Sum over levels of the per-channel feature statistics gap."""
    out_levels, ref_levels = _levels(pyr_out), _levels(pyr_ref)
    if len(out_levels) != len(ref_levels):
        raise ValueError("pyramids have different level counts")
    total = None
    for a, b in zip(out_levels, ref_levels):
        term = feature_stat_difference(a, b)
        total = term if total is None else total + term
    return total


def gan_losses(discriminator, i_acr: torch.Tensor, i_out: torch.Tensor, z_emo: torch.Tensor):
    """Non-saturating two-head adversarial losses.

    The discriminator loss sees the generated batch detached; the generator
    loss keeps it attached, so one call serves both optimizer steps.
    """

    def clamp(p):
        return torch.clamp(p, min=GAN_EPS, max=1.0 - GAN_EPS)

    real_u, real_c = (clamp(p).mean() for p in discriminator(i_acr, z_emo))
    fake_d_u, fake_d_c = (clamp(p).mean() for p in discriminator(i_out.detach(), z_emo))
    d_loss = -(
        torch.log(real_u)
        + torch.log(real_c)
        + torch.log(1.0 - fake_d_u)
        + torch.log(1.0 - fake_d_c)
    )
    fake_g_u, fake_g_c = (clamp(p).mean() for p in discriminator(i_out, z_emo))
    g_loss = -(torch.log(fake_g_u) + torch.log(fake_g_c))
    return d_loss, g_loss


def identity_loss(i_idt, i_acr, pyr_idt, pyr_acr, lam: float = 0.01):
    """Pixel MSE plus weighted feature MSE between identity and anchor."""
    i_idt = torch.as_tensor(i_idt)
    i_acr = torch.as_tensor(i_acr)
    if i_idt.shape != i_acr.shape:
        raise ValueError(f"image shapes differ: {tuple(i_idt.shape)} vs {tuple(i_acr.shape)}")
    return ((i_idt - i_acr) ** 2).mean() + lam * content_loss(pyr_idt, pyr_acr)


def aifb_aesthetic_loss(content, style, gan_generator, identity, weights: LossWeights | None = None):
    """Weighted aesthetic composite for the transformer model."""
    w = weights or LossWeights()
    return (
        w.lambda_content * content
        + w.lambda_style * style
        + w.lambda_gan * gan_generator
        + w.lambda_id * identity
    )


def diffusion_loss(eps_true: torch.Tensor, eps_pred: torch.Tensor):
    """Mean squared error between true and predicted noise."""
    if eps_true.shape != eps_pred.shape:
        raise ValueError(f"noise shapes differ: {tuple(eps_true.shape)} vs {tuple(eps_pred.shape)}")
    return ((eps_pred - eps_true) ** 2).mean()


def texture_mapping_loss(z_prime: torch.Tensor, z_acr: torch.Tensor, decoder, gamma: float = 0.3):
    """Geometrically weighted decoder-feature statistics match.

    Block i (counted from the latent end) contributes gamma**(i+1) times its
    statistics gap, so later blocks matter progressively less.
    """
    _, taps_acr = decoder.decode_with_taps(z_acr)
    _, taps_prime = decoder.decode_with_taps(z_prime)
    if len(taps_acr) != len(taps_prime):
        raise ValueError("decoder tap counts differ between inputs")
    if not taps_acr:
        raise ValueError("decoder exposes no feature taps")
    total = None
    for i, (ta, tp) in enumerate(zip(taps_acr, taps_prime), start=1):
        term = gamma ** (i + 1) * feature_stat_difference(ta, tp)
        total = term if total is None else total + term
    return total


def aifd_aesthetic_loss(dm_part, tm_part, weights: LossWeights | None = None):
    """Weighted aesthetic composite for the diffusion model."""
    w = weights or LossWeights()
    return w.lambda_dm * dm_part + w.lambda_tm * tm_part


def aifb_total(ed, sm, as_, ae, weights: LossWeights | None = None):
    """Total transformer objective from its four weighted parts."""
    w = weights or LossWeights()
    return w.lambda_ed_b * ed + w.lambda_sm * sm + w.lambda_as_b * as_ + w.lambda_ae_b * ae


def aifd_total(ed, as_, ae, weights: LossWeights | None = None):
    """Total diffusion objective from its three weighted parts."""
    w = weights or LossWeights()
    return w.lambda_ed_d * ed + w.lambda_as_d * as_ + w.lambda_ae_d * ae


def satisfied_margin_vectors(
    emotions: EmotionTuple,
    dim: int,
    rng: np.random.Generator,
    alpha: float = 0.02,
    beta: float = 0.01,
):
    """Construct four vectors whose scaled distances satisfy both margins.

    Useful for tests: sentiment_metric_loss on the result is exactly zero.
    """
    v_sed = rng.normal(size=dim)
    v_pos = v_sed + rng.normal(scale=0.01, size=dim)
    d_pos = float(((v_sed - v_pos) ** 2).sum())
    dist_rel = max(wheel_distance(emotions.sed, emotions.rel), 1)
    dist_neg = max(wheel_distance(emotions.sed, emotions.neg), 1)
    unit = rng.normal(size=dim)
    unit /= np.linalg.norm(unit)
    need_rel = (d_pos + alpha) * dist_rel * 4.0
    v_rel = v_sed + unit * np.sqrt(need_rel)
    d_rel = float(((v_sed - v_rel) ** 2).sum()) / dist_rel
    need_neg = (d_rel + beta) * dist_neg * 4.0
    v_neg = v_sed + unit * np.sqrt(need_neg)
    return v_sed, v_pos, v_rel, v_neg
