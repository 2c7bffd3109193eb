"""Multi-modal transformer filter: patch tokens plus affect-augmented text
tokens through shared self-attention blocks, decoded back to pixels, with a
two-head discriminator for adversarial training."""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from .checkpoint import load_checkpoint, load_module_arrays, module_arrays, save_checkpoint
from .images import as_hwc_tensor, chw_to_hwc, hwc_to_chw
from .text import NEUTRAL_VAD, Vocabulary, load_vad_lexicon, tokenize, vad_lookup

TEXT_CHANNELS = 32
VAD_CHANNELS = 3


@dataclass(frozen=True)
class AifbConfig:
    """Shape parameters of the transformer generator."""

    resolution: int = 64
    patch_size: int = 8
    n_blocks: int = 4
    width: int = 128
    n_heads: int = 4
    max_text_len: int = 16
    use_positions: bool = True

    def __post_init__(self):
        if self.resolution % self.patch_size != 0:
            raise ValueError("resolution must be divisible by the patch size")
        if self.width % self.n_heads != 0:
            raise ValueError("width must be divisible by the head count")

    @property
    def grid(self) -> int:
        return self.resolution // self.patch_size

    @property
    def n_image_tokens(self) -> int:
        return self.grid * self.grid

    @property
    def patch_channels(self) -> int:
        return 3 * self.patch_size * self.patch_size


def encode_image_patches(image: torch.Tensor, config: AifbConfig) -> torch.Tensor:
    """Row-major non-overlapping patches flattened to (B, N, patch pixels)."""
    if image.dim() == 3:
        image = image.unsqueeze(0)
    b, c, h, w = image.shape
    if c != 3 or h != config.resolution or w != config.resolution:
        raise ValueError(
            f"expected (3, {config.resolution}, {config.resolution}) images, got {tuple(image.shape[1:])}"
        )
    p = config.patch_size
    patches = image.unfold(2, p, p).unfold(3, p, p)
    patches = patches.permute(0, 2, 3, 1, 4, 5).reshape(b, config.n_image_tokens, config.patch_channels)
    return patches


class SelfAttentionBlock(nn.Module):
    """Pre-norm multi-head self-attention followed by a pre-norm MLP."""

    def __init__(self, width: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.head_dim = width // n_heads
        self.norm1 = nn.LayerNorm(width)
        self.qkv = nn.Linear(width, 3 * width)
        self.proj = nn.Linear(width, width)
        self.norm2 = nn.LayerNorm(width)
        self.mlp = nn.Sequential(
            nn.Linear(width, 4 * width),
            nn.GELU(),
            nn.Linear(4 * width, width),
        )

    def attention(self, z: torch.Tensor, return_weights: bool = False):
        b, n, c = z.shape
        qkv = self.qkv(self.norm1(z)).reshape(b, n, 3, self.n_heads, self.head_dim)
        q, k, v = (qkv[:, :, i].transpose(1, 2) for i in range(3))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        weights = torch.softmax(scores, dim=-1)
        out = (weights @ v).transpose(1, 2).reshape(b, n, c)
        out = self.proj(out)
        if return_weights:
            return out, weights
        return out

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        z = z + self.attention(z)
        return z + self.mlp(self.norm2(z))


class AifbGenerator(nn.Module):
    """Filter generator: fuse image and text tokens, transform, decode."""

    def __init__(self, config: AifbConfig, vocab: Vocabulary, vad_lexicon: dict | None = None):
        super().__init__()
        self.config = config
        self.vocab = vocab
        self.vad_lexicon = load_vad_lexicon() if vad_lexicon is None else vad_lexicon
        c0 = config.width
        self.text_embedding = nn.Embedding(len(vocab), TEXT_CHANNELS)
        self.image_proj = nn.Linear(config.patch_channels, c0)
        self.text_proj = nn.Linear(TEXT_CHANNELS + VAD_CHANNELS, c0)
        self.type_image = nn.Parameter(torch.zeros(c0))
        self.type_text = nn.Parameter(torch.ones(c0) * 0.02)
        self.positions = nn.Parameter(torch.zeros(config.n_image_tokens, c0))
        self.blocks = nn.ModuleList(
            SelfAttentionBlock(c0, config.n_heads) for _ in range(config.n_blocks)
        )
        self.decoder = nn.Sequential(
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(c0, 64, 3, padding=1),
            nn.GELU(),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(64, 32, 3, padding=1),
            nn.GELU(),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(32, 3, 3, padding=1),
        )

    def encode_text(self, description: str) -> torch.Tensor:
        """One description to an (M, text+VAD channels) token matrix."""
        if not description.strip():
            raise ValueError("description must not be empty")
        ids = self.vocab.encode(description, self.config.max_text_len)
        return self._embed_ids(torch.tensor([ids], dtype=torch.long), [tokenize(description)])[0]

    def _embed_ids(self, ids: torch.Tensor, token_lists: list) -> torch.Tensor:
        emb = self.text_embedding(ids)
        vad = torch.full((*ids.shape, VAD_CHANNELS), NEUTRAL_VAD[0], dtype=emb.dtype)
        for b, tokens in enumerate(token_lists):
            for m, tok in enumerate(tokens[: ids.shape[1]]):
                vad[b, m] = torch.tensor(vad_lookup(tok, self.vad_lexicon).as_tuple(), dtype=emb.dtype)
        return torch.cat([emb, vad], dim=2)

    def encode_text_batch(self, descriptions: list) -> torch.Tensor:
        """Pad a batch of descriptions to max_text_len token matrices."""
        m = self.config.max_text_len
        ids = torch.full((len(descriptions), m), self.vocab.pad_id, dtype=torch.long)
        token_lists = []
        for b, text in enumerate(descriptions):
            if not text.strip():
                raise ValueError("description must not be empty")
            row = self.vocab.encode(text, m)
            ids[b, : len(row)] = torch.tensor(row, dtype=torch.long)
            token_lists.append(tokenize(text))
        return self._embed_ids(ids, token_lists)

    def fuse_tokens(self, img_tokens: torch.Tensor, emo_tokens: torch.Tensor) -> torch.Tensor:
        """Project both modalities to the shared width and tag them by type."""
        if img_tokens.shape[-1] != self.config.patch_channels:
            raise ValueError(f"image tokens must have width {self.config.patch_channels}")
        if emo_tokens.shape[-1] != TEXT_CHANNELS + VAD_CHANNELS:
            raise ValueError(f"text tokens must have width {TEXT_CHANNELS + VAD_CHANNELS}")
        img = self.image_proj(img_tokens) + self.type_image
        if self.config.use_positions:
            img = img + self.positions
        emo = self.text_proj(emo_tokens) + self.type_text
        return torch.cat([img, emo], dim=1)

    def transform(self, z0: torch.Tensor) -> torch.Tensor:
        z = z0
        for block in self.blocks:
            z = block(z)
        return z

    def decode_image(self, zl: torch.Tensor) -> torch.Tensor:
        """Decode the image-token slice back to a (B, 3, H, W) image in [0,1]."""
        g = self.config.grid
        img = zl[:, : self.config.n_image_tokens]
        img = img.transpose(1, 2).reshape(img.shape[0], self.config.width, g, g)
        return torch.sigmoid(self.decoder(img))

    def forward(self, images: torch.Tensor, emo_tokens: torch.Tensor) -> torch.Tensor:
        squeeze = images.dim() == 3
        if squeeze:
            images = images.unsqueeze(0)
            if emo_tokens.dim() == 2:
                emo_tokens = emo_tokens.unsqueeze(0)
        patches = encode_image_patches(images, self.config)
        out = self.decode_image(self.transform(self.fuse_tokens(patches, emo_tokens)))
        return out.squeeze(0) if squeeze else out

    def pooled_text(self, emo_tokens: torch.Tensor) -> torch.Tensor:
        """Mean projected text embedding used by the conditional head."""
        if emo_tokens.dim() == 2:
            emo_tokens = emo_tokens.unsqueeze(0)
        return self.text_proj(emo_tokens).mean(dim=1)


class AifbDiscriminator(nn.Module):
    """Strided conv classifier with unconditional and text-conditional heads."""

    def __init__(self, resolution: int = 64, text_width: int = 128):
        super().__init__()
        chans = (32, 64, 128, 256)
        layers = []
        prev = 3
        for c in chans:
            layers += [nn.Conv2d(prev, c, 4, stride=2, padding=1), nn.LeakyReLU(0.2)]
            prev = c
        self.features = nn.Sequential(*layers)
        if resolution % 16 != 0:
            raise ValueError("resolution must be divisible by 16")
        self.uncond_head = nn.Linear(chans[-1], 1)
        self.cond_head = nn.Linear(chans[-1] + text_width, 1)

    def forward(self, images: torch.Tensor, z_emo: torch.Tensor):
        if images.dim() == 3:
            images = images.unsqueeze(0)
        if z_emo.dim() == 1:
            z_emo = z_emo.unsqueeze(0)
        feats = self.features(images).mean(dim=(2, 3))
        p_uncond = torch.sigmoid(self.uncond_head(feats)).squeeze(-1)
        p_cond = torch.sigmoid(self.cond_head(torch.cat([feats, z_emo], dim=1))).squeeze(-1)
        return p_uncond, p_cond


def aifb_apply(generator: AifbGenerator, content_image, description: str) -> torch.Tensor:
    """Run the full pipeline on one (H, W, 3) image and one description."""
    image = as_hwc_tensor(content_image, dtype=torch.float32)
    emo = generator.encode_text(description)
    with torch.no_grad():
        out = generator(hwc_to_chw(image), emo)
    return chw_to_hwc(out)


def save_aifb(path, generator: AifbGenerator, discriminator: AifbDiscriminator | None = None) -> None:
    arrays = module_arrays(generator, "gen.")
    if discriminator is not None:
        arrays.update(module_arrays(discriminator, "disc."))
    cfg = generator.config
    meta = {
        "kind": "aifb",
        "config": {
            "resolution": cfg.resolution,
            "patch_size": cfg.patch_size,
            "n_blocks": cfg.n_blocks,
            "width": cfg.width,
            "n_heads": cfg.n_heads,
            "max_text_len": cfg.max_text_len,
            "use_positions": cfg.use_positions,
        },
        "vocab": generator.vocab.words,
        "has_discriminator": discriminator is not None,
    }
    save_checkpoint(path, arrays, meta)


def load_aifb(path):
    arrays, meta = load_checkpoint(path)
    config = AifbConfig(**meta["config"])
    generator = AifbGenerator(config, Vocabulary(list(meta["vocab"])))
    load_module_arrays(generator, arrays, "gen.")
    discriminator = None
    if meta.get("has_discriminator"):
        discriminator = AifbDiscriminator(config.resolution, config.width)
        load_module_arrays(discriminator, arrays, "disc.")
    return generator, discriminator
