"""Configuration dataclasses and the key-value config file reader."""

from __future__ import annotations

import ast
import configparser
import dataclasses
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import torch


@dataclass
class ModelConfig:
    max_len: int = 35  # N
    max_word_len: int = 15  # C
    e_word: int = 100
    e_cin: int = 16
    e_char: int = 100
    conv_width: int = 5
    highway_layers: int = 2
    hidden: int = 128  # h, per direction
    num_recurrent_layers: int = 3
    use_char_cnn: bool = True
    attention: str = "global"  # none | global | narrow | multihead
    attention_window: int = 7
    attention_heads: int = 8
    dropout: float = 0.2
    init_range: float = 0.05

    def __post_init__(self) -> None:
        if self.attention not in {"none", "global", "narrow", "multihead"}:
            raise ValueError(f"unknown attention kind {self.attention!r}")
        if self.attention == "multihead" and (2 * self.hidden) % self.attention_heads:
            raise ValueError("2*hidden must be divisible by attention_heads")
        if self.num_recurrent_layers < 1:
            raise ValueError("need at least one recurrent layer")

    @property
    def embed_dim(self) -> int:
        return self.e_word + (self.e_char if self.use_char_cnn else 0)


@dataclass
class TrainingConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    max_epochs: int = 15
    wallclock_budget: float = 3600.0  # seconds
    patience: int = 3
    batch_size: int = 64
    seed: int = 0
    loss_alpha: float = 0.1
    loss_beta: float = 0.9
    # "text": alpha weights class 0, so the rare label-1 term gets beta.
    # "equation": alpha multiplies the label-1 term directly.
    weight_reading: str = "text"
    max_steps: int | None = None

    def __post_init__(self) -> None:
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.weight_reading not in {"equation", "text"}:
            raise ValueError(f"unknown weight_reading {self.weight_reading!r}")


@dataclass
class PretrainConfig:
    fraction: float = 0.25  # f
    window: int = 2  # n, window length 2n+1
    sg_dim: int = 64
    sg_epochs: int = 5
    sg_negatives: int = 5
    sg_lr: float = 0.01
    candidate_limit: int | None = 10_000
    median_len: float | None = None  # computed from the corpus when None


@dataclass
class Config:
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Config":
        return cls(
            model=ModelConfig(**d.get("model", {})),
            training=TrainingConfig(**d.get("training", {})),
            pretrain=PretrainConfig(**d.get("pretrain", {})),
        )


def _parse_value(raw: str) -> Any:
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        lowered = raw.lower()
        if lowered in {"true", "false"}:
            return lowered == "true"
        if lowered in {"none", "null"}:
            return None
        return raw


def load_config(path: str | os.PathLike | None = None, **overrides: Any) -> Config:
    """Read a ``key = value`` file into a :class:`Config`.

    Keys may be qualified (``model.hidden = 64``) or bare; bare keys are
    routed to whichever section defines them.  Section headers such as
    ``[model]`` are also accepted.
    """
    values: dict[str, Any] = {}
    if path is not None:
        text = Path(path).read_text()
        parser = configparser.ConfigParser()
        parser.optionxform = str  # keep key case
        parser.read_string("[__root__]\n" + text)
        for section in parser.sections():
            for key, raw in parser.items(section):
                name = key if section == "__root__" else f"{section}.{key}"
                values[name] = _parse_value(raw)
    values.update(overrides)

    cfg = Config()
    sections = {"model": cfg.model, "training": cfg.training, "pretrain": cfg.pretrain}
    updates: dict[str, dict[str, Any]] = {k: {} for k in sections}
    for key, value in values.items():
        if "." in key:
            sec, name = key.split(".", 1)
            if sec not in sections:
                raise KeyError(f"unknown config section {sec!r}")
            targets = [sec]
        else:
            name = key
            targets = [s for s, obj in sections.items() if name in {f.name for f in fields(obj)}]
        if not targets or name not in {f.name for f in fields(sections[targets[0]])}:
            raise KeyError(f"unknown config key {key!r}")
        for sec in targets:
            updates[sec][name] = value
    return Config(
        model=dataclasses.replace(cfg.model, **updates["model"]),
        training=dataclasses.replace(cfg.training, **updates["training"]),
        pretrain=dataclasses.replace(cfg.pretrain, **updates["pretrain"]),
    )


def get_device() -> torch.device:
    return torch.device(os.environ.get("TITLEPRESS_DEVICE", "cpu"))
