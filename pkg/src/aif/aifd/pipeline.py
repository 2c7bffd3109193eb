"""Forward/backward diffusion algebra and the full filter sampler."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from ..images import as_hwc_tensor, chw_to_hwc, hwc_to_chw
from .autoencoder import LatentDecoder, ToyAutoencoder
from .predictor import NoisePredictor
from .schedule import DiffusionSchedule

T_START_FRACTION = 0.6


def _check_t(t: int, schedule: DiffusionSchedule, minimum: int) -> None:
    if not minimum <= t <= schedule.T:
        raise ValueError(f"timestep {t} outside [{minimum}, {schedule.T}]")


def forward_diffuse(z0: torch.Tensor, t: int, eps: torch.Tensor, schedule: DiffusionSchedule) -> torch.Tensor:
    """Noise a clean latent to level t; t = 0 is the exact identity."""
    _check_t(t, schedule, 0)
    if z0.shape != eps.shape:
        raise ValueError(f"noise shape {tuple(eps.shape)} does not match latent {tuple(z0.shape)}")
    ab = schedule.alpha_bar[t]
    return math.sqrt(ab) * z0 + math.sqrt(1.0 - ab) * eps


def denoised_estimate(zt: torch.Tensor, t: int, eps_pred: torch.Tensor, schedule: DiffusionSchedule) -> torch.Tensor:
    """Invert forward_diffuse under a noise estimate."""
    _check_t(t, schedule, 0)
    if zt.shape != eps_pred.shape:
        raise ValueError(f"noise shape {tuple(eps_pred.shape)} does not match latent {tuple(zt.shape)}")
    ab = schedule.alpha_bar[t]
    if ab == 0.0:
        raise ValueError(f"alpha_bar vanishes at t = {t}")
    return (zt - math.sqrt(1.0 - ab) * eps_pred) / math.sqrt(ab)


def denoise_step(
    zt: torch.Tensor,
    t: int,
    eps_fn,
    schedule: DiffusionSchedule,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """One reverse-diffusion update from t to t - 1.

    eps_fn(zt, t) supplies the noise estimate; when sigma_t is positive a
    fresh standard-normal draw from the generator is added.
    """
    _check_t(t, schedule, 1)
    a = schedule.alpha[t]
    ab = schedule.alpha_bar[t]
    eps_hat = eps_fn(zt, t)
    z = (zt - (1.0 - a) / math.sqrt(1.0 - ab) * eps_hat) / math.sqrt(a)
    sigma = schedule.sigma[t]
    if sigma > 0.0:
        noise = torch.randn(zt.shape, generator=generator, dtype=zt.dtype)
        z = z + sigma * noise
    return z


def guided_noise(
    zt: torch.Tensor,
    t: int,
    predictor: NoisePredictor,
    text: torch.Tensor,
    content_taps: list | None,
    scale: float,
) -> torch.Tensor:
    """Classifier-free guidance with exact endpoint behaviour.

    scale 1 is the conditional prediction itself, scale 0 the null-text
    prediction; in between and beyond they are linearly extrapolated.
    """
    if scale < 0:
        raise ValueError("guidance scale must be non-negative")
    batch = zt.shape[0] if zt.dim() == 4 else 1
    if scale == 1.0:
        return predictor(zt, t, text, content_taps)
    uncond = predictor(zt, t, predictor.null_text(batch), content_taps)
    if scale == 0.0:
        return uncond
    cond = predictor(zt, t, text, content_taps)
    return uncond + scale * (cond - uncond)


@dataclass
class AifdModel:
    """Everything needed to apply the diffusion filter."""

    autoencoder: ToyAutoencoder
    decoder: LatentDecoder
    predictor: NoisePredictor
    schedule: DiffusionSchedule


def sample(
    content_image,
    description: str,
    model: AifdModel,
    guidance: float = 1.0,
    seed: int = 0,
    t_start_fraction: float = T_START_FRACTION,
) -> torch.Tensor:
    """Filter one content image toward a description's emotion.

    The content latent is noised to a fraction of the schedule, denoised
    under guidance with content injection, then decoded by the fine-tuned
    reflection decoder.
    """
    if not description.strip():
        raise ValueError("description must not be empty")
    if not 0.0 < t_start_fraction <= 1.0:
        raise ValueError("t_start_fraction must lie in (0, 1]")
    image = hwc_to_chw(as_hwc_tensor(content_image, dtype=torch.float32)).unsqueeze(0)
    schedule = model.schedule
    t_start = max(1, int(round(t_start_fraction * schedule.T)))
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        z0, taps = model.autoencoder.encoder.encode_with_taps(image)
        eps = torch.randn(z0.shape, generator=gen, dtype=z0.dtype)
        zt = forward_diffuse(z0, t_start, eps, schedule)
        ids = torch.tensor([model.predictor.vocab.encode(description)], dtype=torch.long)
        text = model.predictor.encode_text_ids(ids)

        def eps_fn(z, t):
            return guided_noise(z, t, model.predictor, text, taps, guidance)

        for t in range(t_start, 0, -1):
            zt = denoise_step(zt, t, eps_fn, schedule, generator=gen)
        out = model.decoder(zt)
    return chw_to_hwc(out.squeeze(0))
