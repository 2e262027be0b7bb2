"""Text normalization, vocabularies, example encoding, splits and JSONL I/O."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .config import ModelConfig

PAD, UNK = "<pad>", "<unk>"
PAD_ID, UNK_ID = 0, 1
SPECIALS = (PAD, UNK)

_WS = re.compile(r"\s+")


class AlignmentError(ValueError):
    """A short-title token could not be matched, in order, inside the long title."""


def normalize_text(raw: str) -> str:
    text = raw.lower().replace("&", " and ").replace(",", " , ")
    return _WS.sub(" ", text).strip()


def tokenize(normalized: str) -> list[str]:
    return normalized.split()


def prepare(raw: str) -> list[str]:
    return tokenize(normalize_text(raw))


@dataclass
class Vocabulary:
    words: list[str]  # index 0/1 hold PAD/UNK
    chars: list[str]
    word_to_id: dict[str, int] = field(init=False, repr=False)
    char_to_id: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if tuple(self.words[:2]) != SPECIALS or tuple(self.chars[:2]) != SPECIALS:
            raise ValueError("vocabulary must start with the PAD and UNK entries")
        self.word_to_id = {w: i for i, w in enumerate(self.words)}
        self.char_to_id = {c: i for i, c in enumerate(self.chars)}
        if len(self.word_to_id) != len(self.words) or len(self.char_to_id) != len(self.chars):
            raise ValueError("duplicate vocabulary entries")

    pad_id = PAD_ID
    unk_id = UNK_ID

    @property
    def id_to_word(self) -> list[str]:
        return self.words

    def __len__(self) -> int:
        return len(self.words)

    @property
    def num_chars(self) -> int:
        return len(self.chars)

    def word_id(self, token: str) -> int:
        return self.word_to_id.get(token, UNK_ID)

    def char_id(self, ch: str) -> int:
        return self.char_to_id.get(ch, UNK_ID)

    def to_json(self) -> dict[str, list[str]]:
        return {"words": self.words[2:], "chars": self.chars[2:]}

    @classmethod
    def from_json(cls, d: dict[str, list[str]]) -> "Vocabulary":
        return cls(list(SPECIALS) + list(d["words"]), list(SPECIALS) + list(d["chars"]))

    def save(self, path: str | os.PathLike) -> None:
        Path(path).write_text(json.dumps(self.to_json(), ensure_ascii=False))

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Vocabulary":
        return cls.from_json(json.loads(Path(path).read_text()))

    def content_hash(self) -> str:
        blob = json.dumps(self.to_json(), ensure_ascii=False, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _ranked(counts: Counter) -> list[str]:
    return [k for k, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]


def build_vocab(corpus: Iterable[Sequence[str]]) -> Vocabulary:
    """Build word and character vocabularies from tokenized titles.

    Ids follow frequency (descending) then lexicographic order, after the
    PAD and UNK entries.
    """
    words: Counter = Counter()
    chars: Counter = Counter()
    for tokens in corpus:
        for tok in tokens:
            words[tok] += 1
            chars.update(tok)
    if not words:
        raise ValueError("empty corpus: no tokens to build a vocabulary from")
    return Vocabulary(list(SPECIALS) + _ranked(words), list(SPECIALS) + _ranked(chars))


@dataclass
class RawTitlePair:
    long_title: str
    short_title: str | None = None

    def to_record(self) -> dict[str, Any]:
        return {"long": self.long_title, "short": self.short_title}

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "RawTitlePair":
        return cls(rec["long"], rec.get("short"))


@dataclass
class EncodedExample:
    x_w: np.ndarray  # (N,) int64
    x_c: np.ndarray  # (N, C) int64
    mask: np.ndarray  # (N,) bool
    labels: np.ndarray | None = None  # (N,) int64


def align_labels(long_tokens: Sequence[str], short_tokens: Sequence[str]) -> list[int]:
    """Greedy in-order alignment; repeated tokens match the earliest unused position."""
    labels = [0] * len(long_tokens)
    pos = 0
    for tok in short_tokens:
        while pos < len(long_tokens) and long_tokens[pos] != tok:
            pos += 1
        if pos == len(long_tokens):
            raise AlignmentError(f"short-title token {tok!r} not found in order in long title")
        labels[pos] = 1
        pos += 1
    return labels


def check_pair(pair: RawTitlePair) -> str | None:
    """Return a description of the alignment problem, or None if the pair is valid."""
    if pair.short_title is None:
        return None
    try:
        align_labels(prepare(pair.long_title), prepare(pair.short_title))
    except AlignmentError as exc:
        return str(exc)
    return None


def encode_tokens(
    tokens: Sequence[str],
    vocab: Vocabulary,
    config: ModelConfig,
    labels: Sequence[int] | None = None,
) -> EncodedExample:
    if not tokens:
        raise ValueError("cannot encode an empty title")
    n, c = config.max_len, config.max_word_len
    tokens = list(tokens)[:n]
    x_w = np.full(n, PAD_ID, dtype=np.int64)
    x_c = np.full((n, c), PAD_ID, dtype=np.int64)
    mask = np.zeros(n, dtype=bool)
    for i, tok in enumerate(tokens):
        x_w[i] = vocab.word_id(tok)
        ids = [vocab.char_id(ch) for ch in tok[:c]]
        x_c[i, : len(ids)] = ids
        mask[i] = True
    y = None
    if labels is not None:
        y = np.zeros(n, dtype=np.int64)
        y[: len(tokens)] = list(labels)[: len(tokens)]
    return EncodedExample(x_w, x_c, mask, y)


def encode_example(pair: RawTitlePair, vocab: Vocabulary, config: ModelConfig) -> EncodedExample:
    tokens = prepare(pair.long_title)
    labels = None
    if pair.short_title is not None:
        labels = align_labels(tokens, prepare(pair.short_title))
    return encode_tokens(tokens, vocab, config, labels)


def decode_ids(x_w: Sequence[int], vocab: Vocabulary) -> list[str]:
    return [vocab.words[i] for i in x_w if i != PAD_ID]


@dataclass
class EncodedDataset:
    """Stacked encoded examples plus the token/reference text needed for decoding."""

    x_w: np.ndarray  # (M, N)
    x_c: np.ndarray  # (M, N, C)
    mask: np.ndarray  # (M, N)
    labels: np.ndarray  # (M, N); zeros when unlabeled
    tokens: list[list[str]]  # truncated to N
    references: list[str | None]

    def __len__(self) -> int:
        return len(self.tokens)

    def subset(self, idx: Sequence[int] | np.ndarray) -> "EncodedDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return EncodedDataset(
            self.x_w[idx], self.x_c[idx], self.mask[idx], self.labels[idx],
            [self.tokens[i] for i in idx], [self.references[i] for i in idx],
        )

    @classmethod
    def stack(
        cls,
        examples: Sequence[EncodedExample],
        tokens: Sequence[Sequence[str]],
        references: Sequence[str | None],
        config: ModelConfig,
    ) -> "EncodedDataset":
        n, c = config.max_len, config.max_word_len
        m = len(examples)
        x_w = np.stack([e.x_w for e in examples]) if m else np.zeros((0, n), np.int64)
        x_c = np.stack([e.x_c for e in examples]) if m else np.zeros((0, n, c), np.int64)
        mask = np.stack([e.mask for e in examples]) if m else np.zeros((0, n), bool)
        labels = np.stack(
            [e.labels if e.labels is not None else np.zeros(n, np.int64) for e in examples]
        ) if m else np.zeros((0, n), np.int64)
        return cls(x_w, x_c, mask, labels, [list(t)[:n] for t in tokens], list(references))


def encode_dataset(pairs: Sequence[RawTitlePair], vocab: Vocabulary, config: ModelConfig) -> EncodedDataset:
    examples = [encode_example(p, vocab, config) for p in pairs]
    tokens = [prepare(p.long_title) for p in pairs]
    refs = [normalize_text(p.short_title) if p.short_title is not None else None for p in pairs]
    return EncodedDataset.stack(examples, tokens, refs, config)


def encode_labeled_tokens(
    token_lists: Sequence[Sequence[str]],
    label_lists: Sequence[Sequence[int]],
    vocab: Vocabulary,
    config: ModelConfig,
) -> EncodedDataset:
    examples = [encode_tokens(t, vocab, config, y) for t, y in zip(token_lists, label_lists)]
    return EncodedDataset.stack(examples, token_lists, [None] * len(examples), config)


SPLIT_FRACTIONS = (0.72, 0.08, 0.20)


def split_dataset(pairs: Sequence[Any], seed: int) -> tuple[list[Any], list[Any], list[Any]]:
    """Shuffle under ``seed`` and split 72/8/20 into train/val/test."""
    if len(pairs) < 10:
        raise ValueError(f"need at least 10 pairs to split, got {len(pairs)}")
    n = len(pairs)
    order = np.random.default_rng(seed).permutation(n)
    n_test = int(round(SPLIT_FRACTIONS[2] * n))
    n_val = int(round(SPLIT_FRACTIONS[1] * n))
    test = [pairs[i] for i in order[:n_test]]
    val = [pairs[i] for i in order[n_test : n_test + n_val]]
    train = [pairs[i] for i in order[n_test + n_val :]]
    return train, val, test


def read_jsonl(path: str | os.PathLike) -> list[dict[str, Any]]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: malformed JSON on line {lineno}: {exc.msg}") from None
            if not isinstance(rec, dict):
                raise ValueError(f"{path}: line {lineno} is not a JSON object")
            records.append(rec)
    return records


def write_jsonl(path: str | os.PathLike, records: Iterable[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_pairs(path: str | os.PathLike) -> list[RawTitlePair]:
    return [RawTitlePair.from_record(r) for r in read_jsonl(path)]


def write_pairs(path: str | os.PathLike, pairs: Iterable[RawTitlePair]) -> None:
    write_jsonl(path, (p.to_record() for p in pairs))


def cmd_build_vocab(in_path: str, out_path: str) -> Vocabulary:
    vocab = build_vocab(prepare(r["long"]) for r in read_jsonl(in_path))
    vocab.save(out_path)
    return vocab


def cmd_split(in_path: str, seed: int, outdir: str) -> dict[str, int]:
    pairs = read_pairs(in_path)
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    sizes = {}
    for name, part in zip(("train", "val", "test"), split_dataset(pairs, seed)):
        write_pairs(out / f"{name}.jsonl", part)
        sizes[name] = len(part)
    return sizes


def main(argv: Sequence[str] | None = None) -> None:
    ap = argparse.ArgumentParser(prog="corpus")
    sub = ap.add_subparsers(dest="cmd", required=True)
    bv = sub.add_parser("build-vocab")
    bv.add_argument("--in", dest="inp", required=True)
    bv.add_argument("--out", required=True)
    sp = sub.add_parser("split")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--outdir", required=True)
    args = ap.parse_args(argv)
    if args.cmd == "build-vocab":
        v = cmd_build_vocab(args.inp, args.out)
        print(f"{len(v)} words, {v.num_chars} chars")
    else:
        print(json.dumps(cmd_split(args.inp, args.seed, args.outdir)))


if __name__ == "__main__":
    main()
