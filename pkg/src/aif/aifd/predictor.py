"""U-Net-shaped noise predictor with text cross-attention and content taps."""

from __future__ import annotations

import math

import torch
from torch import nn

from ..checkpoint import load_checkpoint, load_module_arrays, module_arrays, save_checkpoint
from ..text import Vocabulary
from .autoencoder import ENCODER_STAGE_CHANNELS, LATENT_CHANNELS

TEXT_DIM = 64
TIME_DIM = 64
STAGE_CHANNELS = (32, 64)
N_ENC_STAGES = 2


def timestep_embedding(t: torch.Tensor, dim: int = TIME_DIM) -> torch.Tensor:
    """Sinusoidal embedding of integer timesteps, shape (B, dim)."""
    t = torch.as_tensor(t, dtype=torch.float32).reshape(-1)
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float32) / half)
    args = t[:, None] * freqs[None, :]
    return torch.cat([torch.cos(args), torch.sin(args)], dim=1)


class CrossAttention(nn.Module):
    """Latent positions attend over text tokens; residual add."""

    def __init__(self, channels: int, text_dim: int = TEXT_DIM, n_heads: int = 2):
        super().__init__()
        if channels % n_heads != 0:
            raise ValueError("channels must be divisible by the head count")
        self.n_heads = n_heads
        self.head_dim = channels // n_heads
        self.norm = nn.GroupNorm(1, channels)
        self.q = nn.Linear(channels, channels)
        self.k = nn.Linear(text_dim, channels)
        self.v = nn.Linear(text_dim, channels)
        self.proj = nn.Linear(channels, channels)

    def forward(self, feat: torch.Tensor, text: torch.Tensor) -> torch.Tensor:
        b, c, h, w = feat.shape
        seq = self.norm(feat).reshape(b, c, h * w).transpose(1, 2)
        q = self.q(seq).reshape(b, h * w, self.n_heads, self.head_dim).transpose(1, 2)
        k = self.k(text).reshape(b, -1, self.n_heads, self.head_dim).transpose(1, 2)
        v = self.v(text).reshape(b, -1, self.n_heads, self.head_dim).transpose(1, 2)
        weights = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(self.head_dim), dim=-1)
        out = (weights @ v).transpose(1, 2).reshape(b, h * w, c)
        out = self.proj(out).transpose(1, 2).reshape(b, c, h, w)
        return feat + out


class NoisePredictor(nn.Module):
    """Two-stage U-Net over latents; text enters through cross-attention,
    content through additive per-stage injection convolutions."""

    def __init__(self, vocab: Vocabulary):
        super().__init__()
        self.vocab = vocab
        c1, c2 = STAGE_CHANNELS
        self.text_embedding = nn.Embedding(len(vocab), TEXT_DIM)
        self.time_mlp = nn.Sequential(nn.Linear(TIME_DIM, TIME_DIM), nn.GELU(), nn.Linear(TIME_DIM, TIME_DIM))
        self.stage1 = nn.Sequential(nn.Conv2d(LATENT_CHANNELS, c1, 3, padding=1), nn.GELU())
        self.time1 = nn.Linear(TIME_DIM, c1)
        # Bias-free so zeroed taps reproduce the uninjected network exactly.
        self.inject1 = nn.Conv2d(ENCODER_STAGE_CHANNELS[0], c1, 3, stride=2, padding=1, bias=False)
        self.refine1 = nn.Sequential(nn.Conv2d(c1, c1, 3, padding=1), nn.GELU())
        self.down = nn.Sequential(nn.Conv2d(c1, c2, 3, stride=2, padding=1), nn.GELU())
        self.time2 = nn.Linear(TIME_DIM, c2)
        self.inject2 = nn.Conv2d(ENCODER_STAGE_CHANNELS[1], c2, 3, stride=2, padding=1, bias=False)
        self.refine2 = nn.Sequential(nn.Conv2d(c2, c2, 3, padding=1), nn.GELU())
        self.cross = CrossAttention(c2)
        self.bottleneck = nn.Sequential(nn.Conv2d(c2, c2, 3, padding=1), nn.GELU())
        self.up = nn.Upsample(scale_factor=2, mode="nearest")
        self.fuse = nn.Sequential(nn.Conv2d(c2 + c1, c1, 3, padding=1), nn.GELU())
        self.head = nn.Conv2d(c1, LATENT_CHANNELS, 3, padding=1)

    def encode_text_ids(self, ids: torch.Tensor) -> torch.Tensor:
        if ids.dim() == 1:
            ids = ids.unsqueeze(0)
        return self.text_embedding(ids)

    def null_text(self, batch: int = 1) -> torch.Tensor:
        """Length-1 sequence of the learned null token, for unconditional runs."""
        ids = torch.full((batch, 1), self.vocab.null_id, dtype=torch.long)
        return self.encode_text_ids(ids)

    def forward(
        self,
        latents: torch.Tensor,
        t,
        text: torch.Tensor,
        content_taps: list | None = None,
    ) -> torch.Tensor:
        """Predict the noise component of latents at timestep t.

        text is an embedded (B, M, text dim) sequence; content_taps, when
        given, are the two encoder stage features of the content image.
        """
        if latents.dim() == 3:
            latents = latents.unsqueeze(0)
        if content_taps is not None and len(content_taps) != N_ENC_STAGES:
            raise ValueError(f"expected {N_ENC_STAGES} content taps, got {len(content_taps)}")
        temb = self.time_mlp(timestep_embedding(t))
        if temb.shape[0] == 1 and latents.shape[0] > 1:
            temb = temb.expand(latents.shape[0], -1)
        f1 = self.stage1(latents) + self.time1(temb)[:, :, None, None]
        if content_taps is not None:
            injected = self.inject1(content_taps[0])
            if injected.shape != f1.shape:
                raise ValueError(f"content tap 1 maps to {tuple(injected.shape)}, stage is {tuple(f1.shape)}")
            f1 = f1 + injected
        f1 = self.refine1(f1)
        f2 = self.down(f1) + self.time2(temb)[:, :, None, None]
        if content_taps is not None:
            injected = self.inject2(content_taps[1])
            if injected.shape != f2.shape:
                raise ValueError(f"content tap 2 maps to {tuple(injected.shape)}, stage is {tuple(f2.shape)}")
            f2 = f2 + injected
        f2 = self.refine2(f2)
        f2 = self.bottleneck(self.cross(f2, text))
        merged = self.fuse(torch.cat([self.up(f2), f1], dim=1))
        return self.head(merged)


def save_predictor(path, predictor: NoisePredictor) -> None:
    meta = {"kind": "noise_predictor", "vocab": predictor.vocab.words}
    save_checkpoint(path, module_arrays(predictor), meta)


def load_predictor(path) -> NoisePredictor:
    arrays, meta = load_checkpoint(path)
    predictor = NoisePredictor(Vocabulary(list(meta["vocab"])))
    load_module_arrays(predictor, arrays)
    return predictor
