"""Command-line entry points for dataset generation, training, application,
evaluation, and comparison grids."""

from __future__ import annotations

import os
from pathlib import Path

import click

from .aifb import aifb_apply, load_aifb
from .aifd.autoencoder import load_autoencoder, load_decoder
from .aifd.pipeline import AifdModel, sample
from .aifd.predictor import load_predictor
from .aifd.schedule import linear_schedule
from .config import TrainConfig, parse_config
from .datagen import generate_synthetic_dataset, load_dataset
from .features import EmotionEnsemble
from .grid import emit_grid_from_spec
from .images import load_image, save_image, to_numpy_hwc
from .metrics import evaluate_pairs
from .text import HttpClient, cot_enhance, offline_enhance
from .train import train_aifb as run_train_aifb
from .train import train_aifd as run_train_aifd
from .train import train_ensemble
from .train.common import read_manifest


def enhance_description(description: str):
    """Chain-of-thought enhancement via the configured language model, or the
    offline keyword fallback when no endpoint is set."""
    if os.environ.get("AIF_LM_ENDPOINT"):
        return cot_enhance(description, HttpClient())
    return offline_enhance(description)


def load_model_dir(model_dir):
    """(kind, payload) for a trained model directory."""
    manifest = read_manifest(model_dir)
    model_dir = Path(model_dir)
    ensemble = EmotionEnsemble.load(model_dir / "ensemble.aif")
    if manifest["model"] == "aifb":
        generator, _ = load_aifb(model_dir / "aifb.aif")
        return "aifb", generator, ensemble, manifest
    schedule = linear_schedule(stochastic=manifest["schedule"].get("stochastic", False))
    model = AifdModel(
        autoencoder=load_autoencoder(model_dir / "autoencoder.aif"),
        decoder=load_decoder(model_dir / "decoder.aif"),
        predictor=load_predictor(model_dir / "predictor.aif"),
        schedule=schedule,
    )
    return "aifd", model, ensemble, manifest


def apply_model(kind, payload, content, text: str, guidance: float, seed: int):
    prompt = enhance_description(text)
    if kind == "aifb":
        return aifb_apply(payload, content, prompt.combined)
    return sample(content, prompt.combined, payload, guidance=guidance, seed=seed)


@click.group()
def main():
    """Emotion-conditioned image filtering toolkit."""


@main.group()
def dataset():
    """Synthetic corpus commands."""


@dataset.command("gen")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--per-category", required=True, type=int)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--resolution", default=64, type=int, show_default=True)
def dataset_gen(out_dir, per_category, seed, resolution):
    """Generate the labelled synthetic corpus under OUT."""
    splits = generate_synthetic_dataset(out_dir, per_category, seed, resolution)
    counts = {name: len(records) for name, records in splits.items()}
    click.echo(f"wrote {sum(counts.values())} samples to {out_dir}: {counts}")


@main.group()
def train():
    """Model training commands."""


def _load_config(config_path) -> TrainConfig:
    if config_path is None:
        return TrainConfig()
    return parse_config(config_path)


@train.command("aifb")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def train_aifb_cmd(data_dir, config_path, out_dir):
    """Train the transformer filter on the corpus under DATA."""
    config = _load_config(config_path)
    splits = load_dataset(data_dir)
    ensemble = train_ensemble(
        splits["train"], splits["val"], steps=config.classifier_steps, seed=config.seed
    )
    run_train_aifb(splits["train"], config, ensemble, out_dir=out_dir)
    click.echo(f"aifb model written to {out_dir}")


@train.command("aifd")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--stage", type=click.Choice(["1", "2", "all"]), default="all", show_default=True)
def train_aifd_cmd(data_dir, config_path, out_dir, stage):
    """Run the staged diffusion training pipeline."""
    config = _load_config(config_path)
    splits = load_dataset(data_dir)
    stages = ("1", "2") if stage == "all" else (stage,)
    run_train_aifd(splits, config, out_dir, stages=stages)
    click.echo(f"aifd components written to {out_dir}")


@main.command("apply")
@click.option("--model", "model_dir", required=True, type=click.Path(exists=True))
@click.option("--content", "content_path", required=True, type=click.Path(exists=True))
@click.option("--text", required=True)
@click.option("--guidance", default=1.5, type=float, show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def apply_cmd(model_dir, content_path, text, guidance, seed, out_path):
    """Filter one content image toward the emotion of TEXT."""
    kind, payload, _, _ = load_model_dir(model_dir)
    content = load_image(content_path)
    out = apply_model(kind, payload, content, text, guidance, seed)
    save_image(out_path, to_numpy_hwc(out))
    click.echo(f"{kind} output written to {out_path}")


@main.command("eval")
@click.option("--model", "model_dir", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option("--split", default="test", show_default=True)
@click.option("--guidance", default=1.5, type=float, show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
def eval_cmd(model_dir, data_dir, report_path, split, guidance, seed):
    """Evaluate a trained model on a corpus split; write the JSON report."""
    kind, payload, ensemble, _ = load_model_dir(model_dir)
    records = load_dataset(data_dir)[split]
    outputs, contents, anchors, labels = [], [], [], []
    for record in records:
        description = record.sample.descriptions[0]
        out = apply_model(kind, payload, record.content, description, guidance, seed)
        outputs.append(to_numpy_hwc(out))
        contents.append(record.content)
        anchors.append(record.sample.image)
        labels.append(record.sample.label)
    report = evaluate_pairs(outputs, contents, anchors, labels, ensemble)
    report.save(report_path)
    click.echo(
        f"ssim={report.ssim:.4f} ssd={report.ssd:.4f} sg={report.sg:.4f} eacc={report.eacc:.4f}"
    )


@main.command("grid")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def grid_cmd(spec_path, out_path):
    """Render the comparison grid described by the JSON spec file."""
    emit_grid_from_spec(spec_path, out_path)
    click.echo(f"grid written to {out_path}")


if __name__ == "__main__":
    main()
