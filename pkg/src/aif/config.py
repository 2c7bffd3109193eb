"""Flat key = value run configuration covering trainer and loss settings."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .losses import LossWeights


@dataclass(frozen=True)
class TrainConfig:
    """Trainer hyperparameters; loss weights ride along as a nested group."""

    epochs: int = 4
    batch_size: int = 8
    lr: float = 1e-4
    paper_lr: float = 1e-6
    seed: int = 0
    ae_epochs: int = 8
    finetune_steps: int = 150
    classifier_steps: int = 300
    warmup_steps: int = 50
    cond_dropout: float = 0.1
    guidance: float = 1.5
    t_start_fraction: float = 0.6
    stochastic_sampling: bool = False
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= self.cond_dropout < 1.0:
            raise ValueError("conditioning dropout must lie in [0, 1)")

    def as_flat_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "weights":
                out.update(asdict(self.weights))
            else:
                out[f.name] = getattr(self, f.name)
        return out


_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _cast(raw: str, target_type) -> object:
    raw = raw.strip()
    if target_type is bool:
        try:
            return _BOOL_WORDS[raw.lower()]
        except KeyError:
            raise ValueError(f"cannot read {raw!r} as a boolean") from None
    return target_type(raw)


def parse_config_text(text: str) -> TrainConfig:
    """Parse `key = value` lines; # starts a comment; unknown keys rejected."""
    train_fields = {f.name: f.type for f in fields(TrainConfig) if f.name != "weights"}
    weight_fields = {f.name for f in fields(LossWeights)}
    train_kwargs = {}
    weight_kwargs = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in weight_fields:
            weight_kwargs[key] = float(raw)
        elif key in train_fields:
            type_name = train_fields[key]
            target = {"int": int, "float": float, "bool": bool}.get(str(type_name), float)
            train_kwargs[key] = _cast(raw, target)
        else:
            raise ValueError(f"line {lineno}: unknown configuration key {key!r}")
    config = TrainConfig(**train_kwargs)
    if weight_kwargs:
        config = replace(config, weights=replace(config.weights, **weight_kwargs))
    return config


def parse_config(path) -> TrainConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))
