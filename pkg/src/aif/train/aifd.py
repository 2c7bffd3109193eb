"""Staged training for the diffusion filter.

Order is enforced: autoencoder pretrain, perspective classifiers, decoder
fine-tune (then frozen), noise-predictor training. Stage 2 refuses to run
without the stage-1 decoder checkpoint on disk.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np
import torch

from ..aifd.autoencoder import (
    ToyAutoencoder,
    load_autoencoder,
    load_decoder,
    save_autoencoder,
    save_decoder,
)
from ..aifd.pipeline import AifdModel
from ..aifd.predictor import NoisePredictor, save_predictor
from ..aifd.schedule import linear_schedule
from ..config import TrainConfig
from ..emotions import WHEEL, sample_emotion_tuple
from ..features import EmotionEnsemble
from ..features.descriptors import sentiment_vectors_from_levels
from ..images import chw_to_hwc
from ..losses import (
    aifd_aesthetic_loss,
    aifd_total,
    anchor_sentiment_loss,
    diffusion_loss,
    emotional_distribution_loss,
    sentiment_metric_loss,
    style_loss,
    texture_mapping_loss,
)
from .aifb import build_vocabulary
from .classifiers import train_ensemble
from .common import LossLog, batch_tensors, check_finite, pick_descriptions, write_manifest

IMAGE_LOSS_T_FRACTION = 0.3


def pretrain_autoencoder(records, config: TrainConfig, log: LossLog | None = None) -> ToyAutoencoder:
    """Pixel-MSE reconstruction training on anchors and content renderings."""
    if not records:
        raise ValueError("training split is empty")
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    autoencoder = ToyAutoencoder()
    opt = torch.optim.Adam(autoencoder.parameters(), lr=1e-3)
    images = []
    for record in records:
        images.append(torch.from_numpy(np.array(record.sample.image, dtype=np.float32)).permute(2, 0, 1))
        images.append(torch.from_numpy(np.array(record.content, dtype=np.float32)).permute(2, 0, 1))
    stack = torch.stack(images)
    batch = min(config.batch_size, len(stack))
    for epoch in range(config.ae_epochs):
        order = rng.permutation(len(stack))
        for start in range(0, len(stack), batch):
            chunk = stack[order[start : start + batch]]
            opt.zero_grad()
            loss = ((autoencoder(chunk) - chunk) ** 2).mean()
            loss.backward()
            opt.step()
            if log is not None:
                log.append({"stage": "autoencoder", "epoch": epoch, "recon": loss.item()})
            check_finite(loss.item(), epoch, "autoencoder reconstruction")
    return autoencoder


def finetune_decoder(
    autoencoder: ToyAutoencoder,
    records,
    ensemble: EmotionEnsemble,
    config: TrainConfig,
    log: LossLog | None = None,
):
    """Anchor-tuple sentiment-metric fine-tuning of the latent decoder.

    Afterwards the decoder is frozen; later stages must not change it.
    """
    if not records:
        raise ValueError("no anchor batches to fine-tune on")
    rng = np.random.default_rng(config.seed + 1)
    decoder = autoencoder.decoder
    decoder.requires_grad_(True)
    opt = torch.optim.Adam(decoder.parameters(), lr=config.lr)
    backbone = ensemble.backbone
    by_category = {}
    for idx, record in enumerate(records):
        by_category.setdefault(record.sample.label.name, []).append(idx)
    weights = config.weights
    for step in range(config.finetune_steps):
        sed = WHEEL[int(rng.integers(0, len(WHEEL)))]
        tup = sample_emotion_tuple(sed, rng)
        picks = []
        for slot, cat in enumerate((tup.sed, tup.pos, tup.rel, tup.neg)):
            pool = by_category.get(cat.name)
            if not pool:
                raise ValueError(f"category {cat.name!r} missing from the fine-tune corpus")
            pick = pool[int(rng.integers(0, len(pool)))]
            # Slot 1 shares the seed category; keep the pair distinct when possible.
            if slot == 1 and len(pool) > 1:
                while pick == picks[0]:
                    pick = pool[int(rng.integers(0, len(pool)))]
            picks.append(pick)
        _, anchors = batch_tensors(records, picks)
        with torch.no_grad():
            latents = autoencoder.encoder(anchors)
        decoded = decoder(latents)
        levels = backbone(decoded)
        vecs = sentiment_vectors_from_levels(levels, backbone, ensemble.sentiment_config)
        l_sm = sentiment_metric_loss(vecs[0], vecs[1], vecs[2], vecs[3], tup, weights.alpha, weights.beta)
        with torch.no_grad():
            levels_ref = backbone(anchors)
        l_s = style_loss(levels, levels_ref)
        loss = l_sm + weights.lambda_finetune * l_s
        opt.zero_grad()
        loss.backward()
        opt.step()
        if log is not None:
            log.append({"stage": "decoder", "step": step, "sm": l_sm.item(), "style": l_s.item(), "ft": loss.item()})
        check_finite(loss.item(), step, "decoder fine-tune loss")
    decoder.requires_grad_(False)
    return decoder


def train_predictor(
    records,
    config: TrainConfig,
    autoencoder: ToyAutoencoder,
    decoder,
    ensemble: EmotionEnsemble,
    vocab,
    schedule,
    steps: int | None = None,
    fixed_batch: bool = False,
    log: LossLog | None = None,
    weight_overrides: dict | None = None,
) -> NoisePredictor:
    """Noise-prediction training with image-space losses on decoded estimates."""
    if not records:
        raise ValueError("training split is empty")
    if any(p.requires_grad for p in decoder.parameters()):
        raise RuntimeError("decoder must be frozen before predictor training")
    rng = np.random.default_rng(config.seed + 2)
    torch.manual_seed(config.seed + 2)
    predictor = NoisePredictor(vocab)
    opt = torch.optim.Adam(predictor.parameters(), lr=config.lr)
    weights = config.weights
    if weight_overrides:
        weights = replace(weights, **weight_overrides)
    t_img_max = max(1, int(IMAGE_LOSS_T_FRACTION * schedule.T))
    batch = min(config.batch_size, len(records))
    if steps is None:
        per_epoch = (len(records) + batch - 1) // batch
        steps = config.epochs * per_epoch
    backbone = ensemble.backbone

    for step in range(steps):
        if fixed_batch:
            indices = list(range(batch))
        else:
            indices = [int(i) for i in rng.choice(len(records), size=batch, replace=False)]
        content, anchor = batch_tensors(records, indices)
        descriptions = pick_descriptions(records, indices, rng)
        targets = [records[i].sample.distribution for i in indices]
        with torch.no_grad():
            z0 = autoencoder.encoder(anchor)
            _, taps = autoencoder.encoder.encode_with_taps(content)

        ids = torch.full((len(indices), 16), vocab.pad_id, dtype=torch.long)
        for b, text in enumerate(descriptions):
            if rng.random() < config.cond_dropout:
                ids[b, 0] = vocab.null_id
                continue
            row = vocab.encode(text, 16)
            ids[b, : len(row)] = torch.tensor(row, dtype=torch.long)
        text = predictor.encode_text_ids(ids)

        t_dm = rng.integers(1, schedule.T + 1, size=len(indices))
        ab_dm = torch.tensor(schedule.alpha_bar[t_dm], dtype=torch.float32)[:, None, None, None]
        eps = torch.randn(z0.shape)
        zt = torch.sqrt(ab_dm) * z0 + torch.sqrt(1.0 - ab_dm) * eps
        eps_hat = predictor(zt, torch.from_numpy(t_dm), text, taps)
        l_dm = diffusion_loss(eps, eps_hat)
        z_prime_dm = (zt - torch.sqrt(1.0 - ab_dm) * eps_hat) / torch.sqrt(ab_dm)
        l_tm = texture_mapping_loss(z_prime_dm, z0, decoder, weights.gamma)

        t_img = rng.integers(1, t_img_max + 1, size=len(indices))
        ab_img = torch.tensor(schedule.alpha_bar[t_img], dtype=torch.float32)[:, None, None, None]
        eps2 = torch.randn(z0.shape)
        zt2 = torch.sqrt(ab_img) * z0 + torch.sqrt(1.0 - ab_img) * eps2
        eps_hat2 = predictor(zt2, torch.from_numpy(t_img), text, taps)
        z_prime = (zt2 - torch.sqrt(1.0 - ab_img) * eps_hat2) / torch.sqrt(ab_img)
        decoded = decoder(z_prime)

        ed_terms = [
            emotional_distribution_loss(targets[b], chw_to_hwc(decoded[b]), ensemble)
            for b in range(len(indices))
        ]
        l_ed = torch.stack(ed_terms).mean()
        levels_out = backbone(decoded)
        with torch.no_grad():
            levels_acr = backbone(anchor)
        v_out = sentiment_vectors_from_levels(levels_out, backbone, ensemble.sentiment_config)
        v_acr = sentiment_vectors_from_levels(levels_acr, backbone, ensemble.sentiment_config)
        l_as = anchor_sentiment_loss(v_out, v_acr.detach())

        l_ae = aifd_aesthetic_loss(l_dm, l_tm, weights)
        total = aifd_total(l_ed, l_as, l_ae, weights)
        opt.zero_grad()
        total.backward()
        opt.step()
        if log is not None:
            log.append(
                {
                    "stage": "predictor",
                    "step": step,
                    "dm": l_dm.item(),
                    "tm": l_tm.item(),
                    "ed": l_ed.item(),
                    "as": l_as.item(),
                    "aesthetic": l_ae.item(),
                    "total": total.item(),
                }
            )
        check_finite(total.item(), step, "predictor objective")
    return predictor


def train_aifd(splits: dict, config: TrainConfig, out_dir, stages=("1", "2")) -> AifdModel:
    """Run the staged pipeline, persisting every component under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_records = splits["train"]
    val_records = splits["val"]
    schedule = linear_schedule(stochastic=config.stochastic_sampling)
    log = LossLog(out_dir / "loss_log.jsonl")
    vocab = build_vocabulary(train_records)

    ae_path = out_dir / "autoencoder.aif"
    ensemble_path = out_dir / "ensemble.aif"
    decoder_path = out_dir / "decoder.aif"

    if "1" in stages:
        autoencoder = pretrain_autoencoder(train_records, config, log)
        save_autoencoder(ae_path, autoencoder)
        ensemble = train_ensemble(
            train_records, val_records, steps=config.classifier_steps, seed=config.seed
        )
        ensemble.save(ensemble_path)
        finetune_decoder(autoencoder, train_records, ensemble, config, log)
        save_decoder(decoder_path, autoencoder.decoder)
    if "2" in stages:
        for path, stage_name in ((ae_path, "autoencoder"), (decoder_path, "stage-1 decoder"), (ensemble_path, "ensemble")):
            if not path.is_file():
                raise RuntimeError(f"stage 2 needs the {stage_name} checkpoint; run stage 1 first")
        autoencoder = load_autoencoder(ae_path)
        autoencoder.requires_grad_(False)
        decoder = load_decoder(decoder_path)
        decoder.requires_grad_(False)
        ensemble = EmotionEnsemble.load(ensemble_path)
        predictor = train_predictor(
            train_records, config, autoencoder, decoder, ensemble, vocab, schedule, log=log
        )
        save_predictor(out_dir / "predictor.aif", predictor)
    write_manifest(
        out_dir,
        "aifd",
        config,
        {"schedule": {"T": schedule.T, "stochastic": config.stochastic_sampling}},
    )
    log.close()
    autoencoder = load_autoencoder(ae_path)
    decoder = load_decoder(decoder_path)
    predictor_path = out_dir / "predictor.aif"
    predictor = None
    if predictor_path.is_file():
        from ..aifd.predictor import load_predictor

        predictor = load_predictor(predictor_path)
    return AifdModel(autoencoder=autoencoder, decoder=decoder, predictor=predictor, schedule=schedule)
