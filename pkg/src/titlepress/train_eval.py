"""Training loops (plain, replaced-token detection, gradual unfreezing) and evaluation metrics."""

from __future__ import annotations

import copy
import csv
import json
import logging
import os
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import torch

from .config import TrainingConfig, get_device
from .corpus import EncodedDataset, normalize_text
from .head_loss import LossWeights, extract_short_title, predict_labels
from .model import TitleCompressor, make_batch

log = logging.getLogger(__name__)

HISTORY_FIELDS = ("epoch", "train_loss", "val_f1", "val_em", "lr", "unfrozen_layers")


def rouge1_f1(predicted: str, reference: str) -> float:
    pred, ref = predicted.split(), reference.split()
    if not pred and not ref:
        return 1.0
    if not pred or not ref:
        return 0.0
    overlap = sum((Counter(pred) & Counter(ref)).values())
    if overlap == 0:
        return 0.0
    p, r = overlap / len(pred), overlap / len(ref)
    return 2 * p * r / (p + r)


def exact_match(predicted: str, reference: str) -> bool:
    """String equality after title normalization (case, '&', commas, whitespace)."""
    return normalize_text(predicted) == normalize_text(reference)


@dataclass
class MetricsReport:
    rouge1_f1: float
    em: float  # percent
    n: int
    records: list[dict] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {"rouge1_f1": self.rouge1_f1, "em": self.em, "n": self.n}

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)


def loss_weights(config: TrainingConfig) -> LossWeights:
    w = LossWeights(config.loss_alpha, config.loss_beta)
    return w if config.weight_reading == "equation" else w.swapped()


@torch.no_grad()
def predict_probs(model: TitleCompressor, ds: EncodedDataset, batch_size: int = 256) -> np.ndarray:
    """Class-1 probabilities, shape (M, N)."""
    was_training = model.training
    model.eval()
    device = next(model.buffers()).device
    out = []
    for start in range(0, len(ds), batch_size):
        b = make_batch(ds, np.arange(start, min(start + batch_size, len(ds))), device)
        out.append(model(b.x_w, b.x_c, b.mask)[..., 1].cpu().numpy())
    model.train(was_training)
    return np.concatenate(out) if out else np.zeros((0, ds.x_w.shape[1]))


def predict(model: TitleCompressor, ds: EncodedDataset, batch_size: int = 256) -> np.ndarray:
    probs = torch.from_numpy(predict_probs(model, ds, batch_size))
    return predict_labels(probs, torch.from_numpy(ds.mask)).numpy()


def score_predictions(labels: np.ndarray, ds: EncodedDataset) -> MetricsReport:
    if len(ds) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    records = []
    for toks, lab, ref in zip(ds.tokens, labels, ds.references):
        if ref is None:
            raise ValueError("evaluation needs gold short titles")
        pred = extract_short_title(toks, lab)
        ref = normalize_text(ref)
        records.append({"pred": pred, "ref": ref, "f1": rouge1_f1(pred, ref), "em": exact_match(pred, ref)})
    f1 = float(np.mean([r["f1"] for r in records]))
    em = 100.0 * float(np.mean([r["em"] for r in records]))
    return MetricsReport(f1, em, len(records), records)


def evaluate(model: TitleCompressor, ds: EncodedDataset) -> MetricsReport:
    return score_predictions(predict(model, ds), ds)


def rtd_accuracy(model: TitleCompressor, ds: EncodedDataset) -> float:
    """Token-level accuracy of replaced-token detection over real positions."""
    pred = predict(model, ds)
    return float((pred == ds.labels)[ds.mask].mean())


def majority_baseline(ds: EncodedDataset) -> float:
    ones = float(ds.labels[ds.mask].mean())
    return max(ones, 1.0 - ones)


@dataclass
class TrainResult:
    model: TitleCompressor
    history: list[dict]
    best_epoch: int
    best_metric: float
    steps: int


def write_history(path: str | os.PathLike, history: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS)
        writer.writeheader()
        for row in history:
            writer.writerow({k: row[k] for k in HISTORY_FIELDS})


def set_trainable(model: TitleCompressor, group_names: set[str] | None) -> None:
    """Enable gradients for the named layer groups only (None = everything)."""
    for name, params in model.layer_groups():
        flag = group_names is None or name in group_names
        for p in params:
            p.requires_grad_(flag)


def _fit(
    model: TitleCompressor,
    train_ds: EncodedDataset,
    val_ds: EncodedDataset | None,
    config: TrainingConfig,
    weights: LossWeights,
    mode: str,
    schedule: Callable[[int], set[str] | None] | None = None,
) -> TrainResult:
    if len(train_ds) == 0:
        raise ValueError("cannot train on an empty dataset")
    val_ds = val_ds if val_ds is not None and len(val_ds) else train_ds
    device = get_device()
    model.to(device)
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    opt = torch.optim.Adam(model.parameters(), lr=config.lr, betas=(config.beta1, config.beta2))

    history: list[dict] = []
    best_metric, best_epoch, best_state = -np.inf, 0, None
    stale, steps = 0, 0
    t0 = time.monotonic()
    for epoch in range(1, config.max_epochs + 1):
        groups = schedule(epoch) if schedule else None
        set_trainable(model, groups)
        model.train()
        losses = []
        order = rng.permutation(len(train_ds))
        for start in range(0, len(order), config.batch_size):
            batch = make_batch(train_ds, order[start : start + config.batch_size], device)
            loss = model.loss(batch, weights)
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            losses.append(loss.item())
            steps += 1
            if config.max_steps is not None and steps >= config.max_steps:
                break

        if mode == "rtd":
            acc = rtd_accuracy(model, val_ds)
            val_f1, val_em, metric = acc, float("nan"), acc
        else:
            report = evaluate(model, val_ds)
            val_f1, val_em, metric = report.rouge1_f1, report.em, report.rouge1_f1
        unfrozen = [n for n, _ in model.layer_groups() if groups is None or n in groups]
        history.append({
            "epoch": epoch, "train_loss": float(np.mean(losses)), "val_f1": val_f1,
            "val_em": val_em, "lr": config.lr, "unfrozen_layers": "+".join(unfrozen),
        })
        log.info("epoch %d loss %.4f val %.4f", epoch, history[-1]["train_loss"], metric)

        if metric > best_metric:
            best_metric, best_epoch, stale = metric, epoch, 0
            best_state = copy.deepcopy(model.state_dict())
        else:
            stale += 1
        if stale >= config.patience:
            break
        if time.monotonic() - t0 > config.wallclock_budget:
            break
        if config.max_steps is not None and steps >= config.max_steps:
            break

    set_trainable(model, None)
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return TrainResult(model, history, best_epoch, float(best_metric), steps)


def train(
    model: TitleCompressor,
    train_ds: EncodedDataset,
    val_ds: EncodedDataset | None,
    config: TrainingConfig,
    weights: LossWeights | None = None,
    mode: str = "compress",
) -> TrainResult:
    """Adam training with early stopping on the validation metric; best epoch is restored.

    ``mode="compress"`` selects on ROUGE-1 F1 of decoded short titles,
    ``mode="rtd"`` on replaced-token detection accuracy.
    """
    return _fit(model, train_ds, val_ds, config, weights or loss_weights(config), mode)


def pretrain_model(
    model: TitleCompressor,
    train_ds: EncodedDataset,
    val_ds: EncodedDataset | None,
    config: TrainingConfig,
    weights: LossWeights,
) -> TrainResult:
    return _fit(model, train_ds, val_ds, config, weights, "rtd")


def unfreezing_schedule(model: TitleCompressor) -> Callable[[int], set[str]]:
    """Epoch 1 trains the top group only; each later epoch adds the next group down."""
    names = [n for n, _ in model.layer_groups()]
    return lambda epoch: set(names[: max(1, epoch)])


def transfer_weights(model: TitleCompressor, state: dict[str, torch.Tensor]) -> None:
    """Copy a pre-trained state dict into ``model``, refusing on any name or shape mismatch."""
    own = model.state_dict()
    problems = []
    for name, tensor in own.items():
        if name not in state:
            problems.append(f"{name}: missing from checkpoint")
        elif tuple(state[name].shape) != tuple(tensor.shape):
            problems.append(f"{name}: checkpoint {tuple(state[name].shape)} vs model {tuple(tensor.shape)}")
    problems += [f"{name}: unexpected in checkpoint" for name in state if name not in own]
    if problems:
        raise ValueError("incompatible checkpoint:\n  " + "\n  ".join(problems))
    model.load_state_dict(state)


def fine_tune(
    model: TitleCompressor,
    train_ds: EncodedDataset,
    val_ds: EncodedDataset | None,
    config: TrainingConfig,
    pretrained_state: dict[str, torch.Tensor] | None = None,
    weights: LossWeights | None = None,
) -> TrainResult:
    """Fine-tune with top-down gradual unfreezing at a constant learning rate."""
    if pretrained_state is not None:
        transfer_weights(model, pretrained_state)
    return _fit(
        model, train_ds, val_ds, config, weights or loss_weights(config), "compress",
        schedule=unfreezing_schedule(model),
    )
