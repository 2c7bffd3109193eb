from .autoencoder import (
    DOWNSAMPLE_FACTOR,
    LATENT_CHANNELS,
    LatentDecoder,
    LatentEncoder,
    ToyAutoencoder,
    decode_latent,
    encode_latent,
    load_autoencoder,
    load_decoder,
    save_autoencoder,
    save_decoder,
)
from .pipeline import (
    T_START_FRACTION,
    AifdModel,
    denoise_step,
    denoised_estimate,
    forward_diffuse,
    guided_noise,
    sample,
)
from .predictor import NoisePredictor, load_predictor, save_predictor, timestep_embedding
from .schedule import DiffusionSchedule, linear_schedule

__all__ = [
    "DOWNSAMPLE_FACTOR",
    "LATENT_CHANNELS",
    "LatentDecoder",
    "LatentEncoder",
    "ToyAutoencoder",
    "decode_latent",
    "encode_latent",
    "load_autoencoder",
    "load_decoder",
    "save_autoencoder",
    "save_decoder",
    "T_START_FRACTION",
    "AifdModel",
    "denoise_step",
    "denoised_estimate",
    "forward_diffuse",
    "guided_noise",
    "sample",
    "NoisePredictor",
    "load_predictor",
    "save_predictor",
    "timestep_embedding",
    "DiffusionSchedule",
    "linear_schedule",
]
