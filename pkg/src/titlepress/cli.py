"""``titlepress`` command line interface."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import corpus as C
from .config import Config, load_config
from .embedder import load_word_vectors, random_word_vectors
from .experiments import (
    ABLATIONS, DEFAULT_FRACTIONS, directional_check, emit_report, get_ablation, load_checkpoint, low_resource_sweep,
    prepare_data, read_checkpoint, run_ablation, save_checkpoint,
)
from .model import TitleCompressor
from .pretrain import PretrainExample, SkipGramModel, cmd_gen, pretrain_class_weights, train_skipgram
from .synthetic import generate
from .train_eval import evaluate, fine_tune, pretrain_model, rtd_accuracy, train, write_history

log = logging.getLogger("titlepress")


def _config(args) -> Config:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["training.seed"] = args.seed
    return load_config(args.config, **overrides)


def _outdir(args) -> Path:
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _word_vectors(args, vocab: C.Vocabulary, cfg: Config) -> np.ndarray:
    if getattr(args, "vectors", None):
        table, missing = load_word_vectors(args.vectors, vocab, cfg.model.e_word)
        log.info("%d of %d words missing from %s", missing, len(vocab) - 2, args.vectors)
        return table
    return random_word_vectors(vocab, cfg.model.e_word, cfg.training.seed)


def cmd_synth(args) -> None:
    pairs = generate(args.n, args.seed or 0).pairs
    C.write_pairs(args.out, pairs)
    print(f"wrote {len(pairs)} pairs to {args.out}")


def cmd_normalize(args) -> None:
    if args.text is not None:
        print(C.normalize_text(args.text))
        return
    out = []
    for rec in C.read_jsonl(args.inp):
        rec = dict(rec)
        for key in ("long", "short"):
            if rec.get(key) is not None:
                rec[key] = C.normalize_text(rec[key])
        out.append(rec)
    C.write_jsonl(args.out, out)
    print(f"normalized {len(out)} records")


def cmd_build_vocab(args) -> None:
    v = C.cmd_build_vocab(args.inp, args.out)
    print(f"{len(v)} words, {v.num_chars} chars (including PAD and UNK)")


def cmd_split(args) -> None:
    print(json.dumps(C.cmd_split(args.inp, args.seed or 0, args.outdir)))


def cmd_train_skipgram(args) -> None:
    cfg = _config(args).pretrain
    titles = [C.prepare(r["long"]) for r in C.read_jsonl(args.titles)]
    vocab = C.Vocabulary.load(args.vocab) if args.vocab else None
    sg = train_skipgram(titles, vocab, window=cfg.window, dim=cfg.sg_dim, epochs=cfg.sg_epochs,
                        negatives=cfg.sg_negatives, lr=cfg.sg_lr, seed=args.seed or 0)
    sg.save(args.out)
    print(f"skip-gram over {len(sg.words)} words saved to {args.out}")


def cmd_pretrain_gen(args) -> None:
    cfg = _config(args)
    n = cmd_gen(args.titles, args.out, args.f or cfg.pretrain.fraction, args.window or cfg.pretrain.window,
                args.seed or 0, args.skipgram, cfg.model.max_len, cfg.pretrain.candidate_limit,
                cfg.pretrain.sg_dim, cfg.pretrain.sg_epochs)
    print(f"wrote {n} examples to {args.out}")


def cmd_pretrain(args) -> None:
    cfg = _config(args)
    out = _outdir(args)
    vocab = C.Vocabulary.load(args.vocab)
    examples = [PretrainExample.from_record(r) for r in C.read_jsonl(args.corpus)]
    if not examples:
        raise ValueError("pre-training corpus is empty")
    ds = C.encode_labeled_tokens([e.tokens for e in examples], [e.labels for e in examples], vocab, cfg.model)
    order = np.random.default_rng(cfg.training.seed).permutation(len(ds))
    n_val = max(1, len(ds) // 20)
    val, tr = ds.subset(order[:n_val]), ds.subset(order[n_val:])
    clean = [e.tokens for e in examples if not any(e.labels)]
    median = cfg.pretrain.median_len or float(np.median([len(t) for t in clean or [e.tokens for e in examples]]))
    weights = pretrain_class_weights(median, cfg.pretrain.fraction, cfg.model.max_len)
    if cfg.training.weight_reading == "text":
        weights = weights.swapped()
    model = TitleCompressor(cfg.model, _word_vectors(args, vocab, cfg), vocab.num_chars)
    res = pretrain_model(model, tr, val, cfg.training, weights)
    save_checkpoint(out / "pretrained.ckpt", model, vocab.content_hash(), res.steps, {"kind": "rtd"})
    write_history(out / "history.csv", res.history)
    print(json.dumps({"rtd_accuracy": rtd_accuracy(model, val), "epochs": len(res.history)}))


def cmd_finetune(args) -> None:
    cfg = _config(args)
    out = _outdir(args)
    vocab = C.Vocabulary.load(args.vocab)
    tr = C.encode_dataset(C.read_pairs(args.train), vocab, cfg.model)
    va = C.encode_dataset(C.read_pairs(args.val), vocab, cfg.model) if args.val else None
    if args.checkpoint:
        meta, state = read_checkpoint(args.checkpoint)
        if meta.get("vocab_hash") not in (None, vocab.content_hash()):
            log.warning("checkpoint vocabulary differs from %s", args.vocab)
        from .config import ModelConfig
        model = TitleCompressor(ModelConfig(**meta["model"]), state["embedder.word_table"].numpy(), meta["num_chars"])
        res = fine_tune(model, tr, va, cfg.training, state)
    else:
        model = TitleCompressor(cfg.model, _word_vectors(args, vocab, cfg), vocab.num_chars)
        res = train(model, tr, va, cfg.training)
    save_checkpoint(out / "model.ckpt", model, vocab.content_hash(), res.steps, {"kind": "compress"})
    write_history(out / "history.csv", res.history)
    print(json.dumps({"best_epoch": res.best_epoch, "val_f1": res.best_metric}))


def cmd_evaluate(args) -> None:
    vocab = C.Vocabulary.load(args.vocab)
    model = load_checkpoint(args.checkpoint, vocab_hash=vocab.content_hash())
    ds = C.encode_dataset(C.read_pairs(args.data), vocab, model.config)
    report = evaluate(model, ds)
    if args.outdir:
        report.save(_outdir(args) / "metrics.json")
    print(json.dumps(report.to_json()))


def _experiment_data(args, cfg: Config, with_pretraining: bool):
    pairs = C.read_pairs(args.pairs)
    titles = [r["long"] for r in C.read_jsonl(args.titles)] if args.titles else None
    return prepare_data(pairs, cfg, titles, with_pretraining=with_pretraining)


def cmd_ablate(args) -> None:
    cfg = _config(args)
    names = args.variants or list(ABLATIONS)
    specs = [get_ablation(n) for n in names]
    data = _experiment_data(args, cfg, any(s.pretrained for s in specs))
    results = [run_ablation(s, data, cfg) for s in specs]
    out = _outdir(args)
    (out / "ablations.json").write_text(json.dumps([r.row() for r in results], indent=2))
    emit_report({"ablations": results}, out)
    for r in results:
        print(f"{r.name:18s} F1 {r.report.rouge1_f1:.4f} EM {r.report.em:.2f}")


def cmd_sweep(args) -> None:
    cfg = _config(args)
    data = _experiment_data(args, cfg, True)
    records = low_resource_sweep(args.fractions or DEFAULT_FRACTIONS, data, cfg)
    out = _outdir(args)
    (out / "sweep.json").write_text(json.dumps(records, indent=2))
    emit_report({"sweep": records}, out)
    for r in records:
        print(f"{r['fraction']:.2f} {r['variant']:10s} F1 {r['f1']:.4f}")


def cmd_directional(args) -> None:
    cfg = _config(args)
    res = directional_check(
        args.n, args.fraction, cfg.training.seed, args.pretrain_epochs, args.batch_size,
        args.weight_reading, cfg,
    )
    if args.outdir:
        (_outdir(args) / "directional.json").write_text(json.dumps(res.to_dict(), indent=2))
    print(f"RTD accuracy {res.rtd_accuracy:.4f} (majority {res.majority:.4f})")
    print(f"pre-trained F1 {res.pretrained_f1:.4f}  scratch F1 {res.scratch_f1:.4f}  "
          f"({res.n_labeled} labeled, {res.seconds:.0f}s)")


def cmd_report(args) -> None:
    results = {}
    for path in args.results:
        loaded = json.loads(Path(path).read_text())
        if isinstance(loaded, dict):
            results.update(loaded)
        elif loaded and "variant" in loaded[0]:
            results.setdefault("sweep", []).extend(loaded)
        else:
            results.setdefault("ablations", []).extend(loaded)
    for p in emit_report(results, args.outdir):
        print(p)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="key = value config file")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--outdir", default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="titlepress", description="Extractive product-title compression")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, **kw):
        p = sub.add_parser(name, parents=[common], **kw)
        p.set_defaults(fn=fn)
        return p

    p = add("synth", cmd_synth, help="write synthetic title/short-title pairs")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--out", required=True)

    p = add("normalize", cmd_normalize, help="normalize a JSONL dataset or a single string")
    p.add_argument("--in", dest="inp")
    p.add_argument("--out")
    p.add_argument("--text")

    p = add("build-vocab", cmd_build_vocab, help="word/char vocabulary from long titles")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)

    p = add("split", cmd_split, help="72/8/20 train/val/test split")
    p.add_argument("--in", dest="inp", required=True)

    p = add("train-skipgram", cmd_train_skipgram, help="skip-gram context model for replacements")
    p.add_argument("--titles", required=True)
    p.add_argument("--vocab")
    p.add_argument("--out", required=True)

    p = add("pretrain-gen", cmd_pretrain_gen, help="replaced-token-detection corpus")
    p.add_argument("--titles", required=True)
    p.add_argument("--f", type=float)
    p.add_argument("--window", type=int)
    p.add_argument("--skipgram")
    p.add_argument("--out", required=True)

    p = add("pretrain", cmd_pretrain, help="pre-train the network as a replaced-token detector")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--vectors")

    p = add("finetune", cmd_finetune, help="fine-tune (with --checkpoint) or train from scratch")
    p.add_argument("--train", required=True)
    p.add_argument("--val")
    p.add_argument("--vocab", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--vectors")

    p = add("evaluate", cmd_evaluate, help="ROUGE-1 F1 and exact match on a labeled set")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--vocab", required=True)

    for name, fn in (("ablate", cmd_ablate), ("sweep", cmd_sweep)):
        p = add(name, fn, help=f"run the {name} experiment")
        p.add_argument("--pairs", required=True)
        p.add_argument("--titles", help="unlabeled long-title corpus (defaults to the pairs' titles)")
        if name == "ablate":
            p.add_argument("--variants", nargs="*", help=", ".join(ABLATIONS))
        else:
            p.add_argument("--fractions", nargs="*", type=float)

    p = add("directional", cmd_directional, help="synthetic pre-trained vs scratch comparison")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--fraction", type=float, default=0.05)
    p.add_argument("--pretrain-epochs", type=int, default=4)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--weight-reading", choices=("equation", "text"))

    p = add("report", cmd_report, help="tables and plots from saved results")
    p.add_argument("--results", nargs="+", required=True)
    return ap


REQUIRES_OUTDIR = {"split", "pretrain", "finetune", "ablate", "sweep", "report"}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        if args.command in REQUIRES_OUTDIR and not args.outdir:
            raise ValueError(f"{args.command} needs --outdir")
        if args.command == "normalize" and args.text is None and not (args.inp and args.out):
            raise ValueError("normalize needs --text or both --in and --out")
        args.fn(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        if args.verbose:
            raise
        print(f"titlepress {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
