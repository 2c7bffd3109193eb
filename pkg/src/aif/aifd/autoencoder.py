"""Toy convolutional autoencoder giving a 4x-downsampled 4-channel latent.

The encoder's two stage outputs are the multi-scale features injected into
the noise predictor; the decoder's two block outputs are the taps consumed
by the texture statistics loss.
"""

from __future__ import annotations

import torch
from torch import nn

from ..checkpoint import load_checkpoint, load_module_arrays, module_arrays, save_checkpoint

LATENT_CHANNELS = 4
DOWNSAMPLE_FACTOR = 4
ENCODER_STAGE_CHANNELS = (32, 64)
DECODER_BLOCK_CHANNELS = (64, 32)


class LatentEncoder(nn.Module):
    def __init__(self):
        super().__init__()
        self.stage1 = nn.Sequential(
            nn.Conv2d(3, ENCODER_STAGE_CHANNELS[0], 3, stride=2, padding=1),
            nn.GELU(),
        )
        self.stage2 = nn.Sequential(
            nn.Conv2d(ENCODER_STAGE_CHANNELS[0], ENCODER_STAGE_CHANNELS[1], 3, stride=2, padding=1),
            nn.GELU(),
        )
        self.head = nn.Conv2d(ENCODER_STAGE_CHANNELS[1], LATENT_CHANNELS, 3, padding=1)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        return self.encode_with_taps(image)[0]

    def encode_with_taps(self, image: torch.Tensor):
        """Latent plus the two stage features, coarse stage last."""
        if image.dim() == 3:
            image = image.unsqueeze(0)
        if image.shape[1] != 3:
            raise ValueError(f"expected 3-channel images, got {image.shape[1]}")
        if image.shape[2] % DOWNSAMPLE_FACTOR or image.shape[3] % DOWNSAMPLE_FACTOR:
            raise ValueError(f"image sides must be divisible by {DOWNSAMPLE_FACTOR}")
        e1 = self.stage1(image)
        e2 = self.stage2(e1)
        return self.head(e2), [e1, e2]


class LatentDecoder(nn.Module):
    def __init__(self):
        super().__init__()
        self.block1 = nn.Sequential(
            nn.Conv2d(LATENT_CHANNELS, DECODER_BLOCK_CHANNELS[0], 3, padding=1),
            nn.GELU(),
            nn.Upsample(scale_factor=2, mode="nearest"),
        )
        self.block2 = nn.Sequential(
            nn.Conv2d(DECODER_BLOCK_CHANNELS[0], DECODER_BLOCK_CHANNELS[1], 3, padding=1),
            nn.GELU(),
            nn.Upsample(scale_factor=2, mode="nearest"),
        )
        self.head = nn.Conv2d(DECODER_BLOCK_CHANNELS[1], 3, 3, padding=1)

    def forward(self, latents: torch.Tensor) -> torch.Tensor:
        return self.decode_with_taps(latents)[0]

    def decode_with_taps(self, latents: torch.Tensor):
        """Image plus the block features, ordered latent end to pixel end."""
        if latents.dim() == 3:
            latents = latents.unsqueeze(0)
        if latents.shape[1] != LATENT_CHANNELS:
            raise ValueError(f"expected {LATENT_CHANNELS}-channel latents, got {latents.shape[1]}")
        d1 = self.block1(latents)
        d2 = self.block2(d1)
        return torch.sigmoid(self.head(d2)), [d1, d2]


class ToyAutoencoder(nn.Module):
    """Encoder/decoder pair trained with pixel reconstruction error."""

    def __init__(self):
        super().__init__()
        self.encoder = LatentEncoder()
        self.decoder = LatentDecoder()

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        return self.decoder(self.encoder(image))


def encode_latent(image: torch.Tensor, autoencoder: ToyAutoencoder) -> torch.Tensor:
    return autoencoder.encoder(image)


def decode_latent(latents: torch.Tensor, decoder: LatentDecoder) -> torch.Tensor:
    return decoder(latents)


def save_autoencoder(path, autoencoder: ToyAutoencoder) -> None:
    save_checkpoint(path, module_arrays(autoencoder), {"kind": "toy_autoencoder"})


def load_autoencoder(path) -> ToyAutoencoder:
    arrays, _ = load_checkpoint(path)
    autoencoder = ToyAutoencoder()
    load_module_arrays(autoencoder, arrays)
    return autoencoder


def save_decoder(path, decoder: LatentDecoder) -> None:
    save_checkpoint(path, module_arrays(decoder), {"kind": "reflection_decoder"})


def load_decoder(path) -> LatentDecoder:
    arrays, _ = load_checkpoint(path)
    decoder = LatentDecoder()
    load_module_arrays(decoder, arrays)
    return decoder
