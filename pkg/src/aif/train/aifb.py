"""Minimax training loop for the transformer filter."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from ..aifb import AifbConfig, AifbDiscriminator, AifbGenerator, save_aifb
from ..checkpoint import (
    load_checkpoint,
    load_module_arrays,
    load_optimizer_arrays,
    module_arrays,
    optimizer_arrays,
    save_checkpoint,
)
from ..config import TrainConfig
from ..emotions import CATEGORY_NAMES, WHEEL, sample_emotion_tuple
from ..features.descriptors import sentiment_vectors_from_levels
from ..images import chw_to_hwc
from ..losses import (
    aifb_aesthetic_loss,
    aifb_total,
    anchor_sentiment_loss,
    content_loss,
    emotional_distribution_loss,
    gan_losses,
    identity_loss,
    sentiment_metric_loss,
    style_loss,
)
from ..text import Vocabulary, load_emotion_words
from .common import LossLog, batch_tensors, check_finite, pick_descriptions, restore_rng_state, rng_state_arrays, write_manifest

LOG_FIELDS = ("d_loss", "gan_g", "content", "style", "identity", "aesthetic", "ed", "sm", "as", "total")


def build_vocabulary(records) -> Vocabulary:
    """Corpus descriptions plus lexicon and directive words."""
    texts = [d for r in records for d in r.sample.descriptions]
    extra = sorted(load_emotion_words()) + [c.name for c in WHEEL] + ["emphasize", "atmosphere"]
    return Vocabulary.build(texts, extra_words=extra)


def _warmup_lr(optimizer, base_lr: float, step: int, warmup_steps: int) -> None:
    scale = min(1.0, (step + 1) / max(1, warmup_steps))
    for group in optimizer.param_groups:
        group["lr"] = base_lr * scale


def _records_by_category(records) -> dict:
    grouped = {}
    for idx, record in enumerate(records):
        grouped.setdefault(record.sample.label.name, []).append(idx)
    return grouped


def train_aifb(
    records,
    config: TrainConfig,
    ensemble,
    out_dir=None,
    steps: int | None = None,
    fixed_batch: bool = False,
    model_config: AifbConfig | None = None,
    resume_from=None,
    checkpoint_every: int | None = None,
):
    """Alternating discriminator/generator optimization.

    Returns (generator, discriminator, loss log). With fixed_batch the same
    leading records are reused every step, for overfit smoke checks.
    """
    if not records:
        raise ValueError("training split is empty")
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    model_config = model_config or AifbConfig()
    vocab = build_vocabulary(records)
    generator = AifbGenerator(model_config, vocab)
    discriminator = AifbDiscriminator(model_config.resolution, model_config.width)
    opt_g = torch.optim.Adam(generator.parameters(), lr=config.lr)
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=config.lr)
    backbone = ensemble.backbone
    weights = config.weights
    by_category = _records_by_category(records)
    missing = [name for name in CATEGORY_NAMES if name not in by_category]
    if missing:
        raise ValueError(f"sentiment metric term needs every category; missing {missing}")
    start_step = 0
    if resume_from is not None:
        arrays, meta = load_checkpoint(resume_from)
        load_module_arrays(generator, arrays, "gen.")
        load_module_arrays(discriminator, arrays, "disc.")
        load_optimizer_arrays(opt_g, arrays, "optg.")
        load_optimizer_arrays(opt_d, arrays, "optd.")
        restore_rng_state(arrays, meta, rng)
        start_step = meta["step"]

    batch = min(config.batch_size, len(records))
    if steps is None:
        per_epoch = (len(records) + batch - 1) // batch
        steps = config.epochs * per_epoch
    log = LossLog(Path(out_dir) / "loss_log.jsonl" if out_dir else None)

    def save_state(path, step):
        arrays = module_arrays(generator, "gen.")
        arrays.update(module_arrays(discriminator, "disc."))
        arrays.update(optimizer_arrays(opt_g, "optg."))
        arrays.update(optimizer_arrays(opt_d, "optd."))
        rng_arr, rng_meta = rng_state_arrays(rng)
        arrays.update(rng_arr)
        meta = {
            "kind": "aifb_train_state",
            "step": step,
            **rng_meta,
        }
        save_checkpoint(path, arrays, meta)

    for step in range(start_step, steps):
        if fixed_batch:
            indices = list(range(batch))
        else:
            indices = [int(i) for i in rng.choice(len(records), size=batch, replace=False)]
        content, anchor = batch_tensors(records, indices)
        descriptions = pick_descriptions(records, indices, rng)
        targets = [records[i].sample.distribution for i in indices]

        emo = generator.encode_text_batch(descriptions)
        i_out = generator(content, emo)
        z_emo = generator.pooled_text(emo).detach()
        d_loss, _ = gan_losses(discriminator, anchor, i_out.detach(), z_emo)

        _warmup_lr(opt_d, config.lr, step, config.warmup_steps)
        opt_d.zero_grad()
        d_loss.backward()
        opt_d.step()

        # Generator-side adversarial term against the just-updated critic.
        _, g_gan = gan_losses(discriminator, anchor, i_out, z_emo)

        levels_out = backbone(i_out)
        with torch.no_grad():
            levels_content = backbone(content)
            levels_anchor = backbone(anchor)
        l_content = content_loss(levels_out, levels_content)
        l_style = style_loss(levels_out, levels_anchor)
        i_idt = generator(anchor, emo)
        l_identity = identity_loss(
            i_idt, anchor, backbone(i_idt), levels_anchor, weights.lambda_identity_features
        )
        l_ae = aifb_aesthetic_loss(l_content, l_style, g_gan, l_identity, weights)

        ed_terms = [
            emotional_distribution_loss(targets[b], chw_to_hwc(i_out[b]), ensemble)
            for b in range(len(indices))
        ]
        l_ed = torch.stack(ed_terms).mean()

        v_out = sentiment_vectors_from_levels(levels_out, backbone, ensemble.sentiment_config)
        v_acr = sentiment_vectors_from_levels(levels_anchor, backbone, ensemble.sentiment_config)
        l_as = anchor_sentiment_loss(v_out, v_acr.detach())

        sed = WHEEL[int(rng.integers(0, len(WHEEL)))]
        tup = sample_emotion_tuple(sed, rng)
        tuple_indices = []
        for cat, distinct_from in ((tup.sed, None), (tup.pos, 0), (tup.rel, None), (tup.neg, None)):
            pool = by_category[cat.name]
            pick = int(pool[int(rng.integers(0, len(pool)))])
            if distinct_from is not None and len(pool) > 1:
                while pick == tuple_indices[distinct_from]:
                    pick = int(pool[int(rng.integers(0, len(pool)))])
            tuple_indices.append(pick)
        t_content, _ = batch_tensors(records, tuple_indices)
        t_desc = pick_descriptions(records, tuple_indices, rng)
        t_out = generator(t_content, generator.encode_text_batch(t_desc))
        t_vecs = sentiment_vectors_from_levels(backbone(t_out), backbone, ensemble.sentiment_config)
        l_sm = sentiment_metric_loss(
            t_vecs[0], t_vecs[1], t_vecs[2], t_vecs[3], tup, weights.alpha, weights.beta
        )

        total = aifb_total(l_ed, l_sm, l_as, l_ae, weights)
        _warmup_lr(opt_g, config.lr, step, config.warmup_steps)
        opt_g.zero_grad()
        total.backward()
        opt_g.step()

        row = {
            "step": step,
            "d_loss": d_loss.item(),
            "gan_g": g_gan.item(),
            "content": l_content.item(),
            "style": l_style.item(),
            "identity": l_identity.item(),
            "aesthetic": l_ae.item(),
            "ed": l_ed.item(),
            "sm": l_sm.item(),
            "as": l_as.item(),
            "total": total.item(),
        }
        check_finite(row["total"], step, "generator objective")
        check_finite(row["d_loss"], step, "discriminator loss")
        log.append(row)

        if out_dir and checkpoint_every and (step + 1) % checkpoint_every == 0:
            save_state(Path(out_dir) / "train_state.aif", step + 1)

    if out_dir:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_aifb(out_dir / "aifb.aif", generator, discriminator)
        save_state(out_dir / "train_state.aif", steps)
        ensemble.save(out_dir / "ensemble.aif")
        write_manifest(out_dir, "aifb", config, {"steps": steps})
    log.close()
    return generator, discriminator, log
