"""Ablation grid, low-resource sweep, checkpoint persistence and report emission."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
import time
import warnings
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .config import Config, ModelConfig, TrainingConfig
from .corpus import (
    EncodedDataset, RawTitlePair, Vocabulary, build_vocab, encode_dataset,
    encode_labeled_tokens, prepare, split_dataset,
)
from .embedder import random_word_vectors
from .model import TitleCompressor
from .pretrain import (
    SkipGramModel, build_pretraining_corpus, pretrain_class_weights, train_skipgram,
)
from .train_eval import (
    MetricsReport, TrainResult, evaluate, fine_tune, majority_baseline, pretrain_model,
    rtd_accuracy, train,
)

log = logging.getLogger(__name__)

# Reference values from the original full-scale runs (proprietary data; not reproducible here).
REFERENCE_ABLATIONS = {
    "CB3SA": (0.8465, 62.24),
    "CB3SA+PT": (0.8558, 63.83),
    "CB3SA-CharCNN": (0.8414, 60.13),
    "CB3SA-BLSTM1": (0.8455, 62.37),
    "CB3SA-SA": (0.8417, 60.22),
    "CB3SA-SA+NWSA7": (0.8458, 62.39),
    "CB3SA-SA+MHSA8": (0.8420, 59.72),
}
REFERENCE_RTD_ACCURACY = 0.9897


@dataclass(frozen=True)
class AblationSpec:
    name: str
    use_char_cnn: bool = True
    num_recurrent_layers: int = 3
    attention: str = "global"
    attention_window: int = 7
    attention_heads: int = 8
    pretrained: bool = False

    def model_config(self, base: ModelConfig) -> ModelConfig:
        return dataclasses.replace(
            base, use_char_cnn=self.use_char_cnn, num_recurrent_layers=self.num_recurrent_layers,
            attention=self.attention, attention_window=self.attention_window,
            attention_heads=self.attention_heads,
        )


ABLATIONS: dict[str, AblationSpec] = {
    s.name: s for s in [
        AblationSpec("CB3SA"),
        AblationSpec("CB3SA+PT", pretrained=True),
        AblationSpec("CB3SA-CharCNN", use_char_cnn=False),
        AblationSpec("CB3SA-BLSTM1", num_recurrent_layers=2),
        AblationSpec("CB3SA-SA", attention="none"),
        AblationSpec("CB3SA-SA+NWSA7", attention="narrow", attention_window=7),
        AblationSpec("CB3SA-SA+MHSA8", attention="multihead", attention_heads=8),
    ]
}


def get_ablation(name: str) -> AblationSpec:
    try:
        return ABLATIONS[name]
    except KeyError:
        raise KeyError(f"unknown ablation {name!r}; valid names: {', '.join(ABLATIONS)}") from None


# ---------------------------------------------------------------- checkpoints

def save_checkpoint(
    path: str | os.PathLike,
    model: TitleCompressor,
    vocab_hash: str | None = None,
    step: int = 0,
    extra: dict | None = None,
) -> None:
    """Zip archive: config.json, index.json and tensors.bin (little-endian float32)."""
    index, blob, offset = [], io.BytesIO(), 0
    for name, tensor in model.state_dict().items():
        raw = tensor.detach().cpu().numpy().astype("<f4").tobytes()
        index.append({"name": name, "shape": list(tensor.shape), "offset": offset, "nbytes": len(raw)})
        blob.write(raw)
        offset += len(raw)
    meta = {
        "model": dataclasses.asdict(model.config), "num_chars": model.num_chars,
        "vocab_hash": vocab_hash, "step": step, "extra": extra or {},
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr("config.json", json.dumps(meta, indent=2))
        zf.writestr("index.json", json.dumps(index))
        zf.writestr("tensors.bin", blob.getvalue())


def read_checkpoint(path: str | os.PathLike) -> tuple[dict, dict[str, torch.Tensor]]:
    if not Path(path).is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read("config.json"))
            index = json.loads(zf.read("index.json"))
            data = zf.read("tensors.bin")
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError) as exc:
        raise ValueError(f"corrupt checkpoint {path}: {exc}") from None
    state = {}
    for entry in index:
        end = entry["offset"] + entry["nbytes"]
        if end > len(data):
            raise ValueError(f"corrupt checkpoint {path}: tensor {entry['name']} truncated")
        arr = np.frombuffer(data[entry["offset"] : end], dtype="<f4").reshape(entry["shape"])
        state[entry["name"]] = torch.from_numpy(arr.astype(np.float32))
    return meta, state


def load_checkpoint(
    path: str | os.PathLike,
    model: TitleCompressor | None = None,
    vocab_hash: str | None = None,
) -> TitleCompressor:
    meta, state = read_checkpoint(path)
    if vocab_hash is not None and meta.get("vocab_hash") not in (None, vocab_hash):
        warnings.warn(
            f"checkpoint vocabulary hash {meta['vocab_hash'][:12]} differs from {vocab_hash[:12]}",
            stacklevel=2,
        )
    if model is None:
        cfg = ModelConfig(**meta["model"])
        model = TitleCompressor(cfg, state["embedder.word_table"].numpy(), meta["num_chars"])
    model.load_state_dict(state)
    model.eval()
    return model


# ---------------------------------------------------------------- data

@dataclass
class ExperimentData:
    vocab: Vocabulary
    word_vectors: np.ndarray
    train: EncodedDataset
    val: EncodedDataset
    test: EncodedDataset
    pretrain_train: EncodedDataset | None = None
    pretrain_val: EncodedDataset | None = None
    median_len: float = 10.0
    skipgram: SkipGramModel | None = None
    pretrained_states: dict = field(default_factory=dict, repr=False)


def prepare_data(
    pairs: Sequence[RawTitlePair],
    config: Config,
    titles: Sequence[str] | None = None,
    word_vectors: np.ndarray | None = None,
    with_pretraining: bool = True,
    pretrain_val_fraction: float = 0.05,
) -> ExperimentData:
    """Vocabulary, 72/8/20 labeled splits and (optionally) the replaced-token corpus.

    ``titles`` is the unlabeled long-title corpus; it defaults to the long
    titles of ``pairs``.
    """
    seed = config.training.seed
    mc = config.model
    title_tokens = [prepare(t) for t in (titles if titles is not None else [p.long_title for p in pairs])]
    title_tokens = [t for t in title_tokens if t]
    vocab = build_vocab(title_tokens)
    if word_vectors is None:
        word_vectors = random_word_vectors(vocab, mc.e_word, seed)
    tr, va, te = split_dataset(list(pairs), seed)
    data = ExperimentData(
        vocab, word_vectors,
        encode_dataset(tr, vocab, mc), encode_dataset(va, vocab, mc), encode_dataset(te, vocab, mc),
        median_len=float(np.median([len(t) for t in title_tokens])),
    )
    if with_pretraining:
        pc = config.pretrain
        sg = train_skipgram(
            title_tokens, vocab, window=pc.window, dim=pc.sg_dim, epochs=pc.sg_epochs,
            negatives=pc.sg_negatives, lr=pc.sg_lr, seed=seed,
        )
        order = np.random.default_rng(seed).permutation(len(title_tokens))
        n_val = max(1, int(round(pretrain_val_fraction * len(order))))
        parts = {}
        for name, idx, sub_seed in (("val", order[:n_val], seed + 1), ("train", order[n_val:], seed)):
            examples = list(build_pretraining_corpus(
                [title_tokens[i] for i in idx], sg, pc.fraction, sub_seed, pc.window,
                mc.max_len, pc.candidate_limit,
            ))
            parts[name] = encode_labeled_tokens(
                [e.tokens for e in examples], [e.labels for e in examples], vocab, mc,
            )
        data.pretrain_train, data.pretrain_val, data.skipgram = parts["train"], parts["val"], sg
    return data


def build_model(data: ExperimentData, model_config: ModelConfig, seed: int) -> TitleCompressor:
    torch.manual_seed(seed)
    return TitleCompressor(model_config, data.word_vectors, data.vocab.num_chars)


@dataclass
class PretrainOutcome:
    state: dict[str, torch.Tensor]
    result: TrainResult
    accuracy: float
    majority: float


def pretrain(data: ExperimentData, model_config: ModelConfig, config: Config) -> PretrainOutcome:
    """Train the network as a replaced-token detector; cached per architecture."""
    key = json.dumps(dataclasses.asdict(model_config), sort_keys=True)
    if key in data.pretrained_states:
        return data.pretrained_states[key]
    if data.pretrain_train is None:
        raise ValueError("experiment data has no pre-training corpus")
    pc = config.pretrain
    weights = pretrain_class_weights(pc.median_len or data.median_len, pc.fraction, model_config.max_len)
    if config.training.weight_reading == "text":
        weights = weights.swapped()
    model = build_model(data, model_config, config.training.seed)
    result = pretrain_model(model, data.pretrain_train, data.pretrain_val, config.training, weights)
    outcome = PretrainOutcome(
        {k: v.clone() for k, v in model.state_dict().items()}, result,
        rtd_accuracy(model, data.pretrain_val), majority_baseline(data.pretrain_val),
    )
    data.pretrained_states[key] = outcome
    return outcome


# ---------------------------------------------------------------- ablations / sweep

@dataclass
class RunResult:
    name: str
    report: MetricsReport
    history: list[dict]
    params: int
    extra: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {"Model": self.name, "Params": self.params, "F1": self.report.rouge1_f1, "EM": self.report.em}


def _train_variant(
    spec: AblationSpec, train_ds: EncodedDataset, data: ExperimentData, config: Config,
    pretrain_config: Config | None = None,
) -> tuple[TitleCompressor, TrainResult]:
    mc = spec.model_config(config.model)
    model = build_model(data, mc, config.training.seed)
    if spec.pretrained:
        outcome = pretrain(data, mc, pretrain_config or config)
        result = fine_tune(model, train_ds, data.val, config.training, outcome.state)
    else:
        result = train(model, train_ds, data.val, config.training)
    return model, result


def run_ablation(
    spec: AblationSpec | str, data: ExperimentData, config: Config, pretrain_config: Config | None = None,
) -> RunResult:
    """Build, train and test one variant on the shared splits."""
    spec = get_ablation(spec) if isinstance(spec, str) else spec
    model, result = _train_variant(spec, data.train, data, config, pretrain_config)
    return RunResult(spec.name, evaluate(model, data.test), result.history, model.num_trainable())


DEFAULT_FRACTIONS = (0.05, 0.10, 0.20, 0.40, 0.70, 1.0)


def nested_subsample(n: int, fraction: float, seed: int) -> np.ndarray:
    """Indices of a ``fraction`` subsample; smaller fractions are prefixes of larger ones."""
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    k = int(round(fraction * n))
    if k < 1:
        raise ValueError(f"fraction {fraction} of {n} examples leaves no training data")
    return np.random.default_rng(seed).permutation(n)[:k]


def low_resource_sweep(
    fractions: Sequence[float],
    data: ExperimentData,
    config: Config,
    variants: Sequence[str] = ("CB3SA+PT", "CB3SA"),
    pretrain_config: Config | None = None,
) -> list[dict]:
    """Fine-tune each variant on nested train subsamples; test set fixed throughout."""
    for p in fractions:
        nested_subsample(len(data.train), p, config.training.seed)  # validate up front
    records = []
    for p in sorted(fractions):
        idx = nested_subsample(len(data.train), p, config.training.seed)
        sub = data.train.subset(idx)
        for name in variants:
            model, _ = _train_variant(get_ablation(name), sub, data, config, pretrain_config)
            rep = evaluate(model, data.test)
            records.append({
                "fraction": p, "variant": name, "n_train": len(idx),
                "f1": rep.rouge1_f1, "em": rep.em, "n_test": rep.n,
            })
            log.info("fraction %.2f %s F1 %.4f", p, name, rep.rouge1_f1)
    return records


# ---------------------------------------------------------------- reporting

@dataclass
class DirectionalResult:
    rtd_accuracy: float
    majority: float
    pretrained_f1: float
    scratch_f1: float
    n_labeled: int
    seconds: float

    @property
    def rtd_margin(self) -> float:
        return self.rtd_accuracy - self.majority

    def to_dict(self) -> dict:
        return {**dataclasses.asdict(self), "rtd_margin": self.rtd_margin}


def directional_check(
    n_titles: int = 5000,
    fraction: float = 0.05,
    seed: int = 0,
    pretrain_epochs: int = 4,
    batch_size: int = 16,
    weight_reading: str | None = None,
    config: Config | None = None,
) -> DirectionalResult:
    """Synthetic low-resource run: RTD pre-training, then pre-trained vs scratch fine-tuning.

    Both arms share the model seed, labeled subset and training protocol.
    """
    from .synthetic import generate

    start = time.perf_counter()
    config = config or Config()
    tc = dataclasses.replace(
        config.training, seed=seed, batch_size=batch_size,
        weight_reading=weight_reading or config.training.weight_reading,
    )
    config = dataclasses.replace(config, training=tc)
    data = prepare_data(generate(n_titles, seed).pairs, config)
    pt_config = dataclasses.replace(config, training=dataclasses.replace(tc, max_epochs=pretrain_epochs))
    outcome = pretrain(data, config.model, pt_config)
    labeled = data.train.subset(nested_subsample(len(data.train), fraction, seed))

    pt_model = build_model(data, config.model, seed)
    fine_tune(pt_model, labeled, data.val, tc, outcome.state)
    scratch = build_model(data, config.model, seed)
    train(scratch, labeled, data.val, tc)
    return DirectionalResult(
        outcome.accuracy, outcome.majority,
        evaluate(pt_model, data.test).rouge1_f1, evaluate(scratch, data.test).rouge1_f1,
        len(labeled), time.perf_counter() - start,
    )


def emit_report(results: dict, outdir: str | os.PathLike) -> list[Path]:
    """Write metrics JSON, ablation and parameter-count CSVs and the F1-vs-fraction curve.

    ``results`` may hold ``"ablations"`` (list of RunResult or row dicts with
    Model/F1/EM[/Params]) and ``"sweep"`` (records from
    :func:`low_resource_sweep`).
    """
    ablations = [r.row() if isinstance(r, RunResult) else dict(r) for r in results.get("ablations", [])]
    sweep = list(results.get("sweep", []))
    if not ablations and not sweep:
        raise ValueError("no results to report")
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise PermissionError(f"report directory {out} is not writable")

    written = []
    metrics = {"ablations": ablations, "sweep": sweep}
    metrics.update({k: v for k, v in results.items() if k not in metrics})
    p = out / "metrics.json"
    p.write_text(json.dumps(metrics, indent=2, default=float))
    written.append(p)

    if ablations:
        p = out / "ablations.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["Model", "F1", "EM"])
            for r in ablations:
                w.writerow([r["Model"], f"{r['F1']:.4f}", f"{r['EM']:.2f}"])
        written.append(p)
        if any("Params" in r for r in ablations):
            p = out / "params.csv"
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["Model", "Params", "F1", "EM"])
                for r in ablations:
                    w.writerow([r["Model"], r.get("Params", ""), f"{r['F1']:.4f}", f"{r['EM']:.2f}"])
            written.append(p)

    if sweep:
        p = out / "sweep.csv"
        with open(p, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(sweep[0]))
            w.writeheader()
            w.writerows(sweep)
        written.append(p)
        written.append(_plot_sweep(sweep, out / "sweep.png"))
    return written


def _plot_sweep(records: Sequence[dict], path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for variant in dict.fromkeys(r["variant"] for r in records):
        rows = sorted((r for r in records if r["variant"] == variant), key=lambda r: r["fraction"])
        ax.plot([100 * r["fraction"] for r in rows], [r["f1"] for r in rows], marker="o", label=variant)
    ax.set_xlabel("% of training data used for fine-tuning")
    ax.set_ylabel("test ROUGE-1 F1")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
