"""Replaced-token-detection data: skip-gram context model, replacement choice, corruption rounds."""

from __future__ import annotations

import argparse
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Protocol, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .corpus import PAD_ID, UNK_ID, Vocabulary, build_vocab, prepare, read_jsonl, write_jsonl
from .head_loss import LossWeights

LOG_PROB_FLOOR = math.log(1e-9)


class ContextModel(Protocol):
    """Anything that can give log P_s(w | c) rows over the shared vocabulary ids."""

    words: list[str]
    word_to_id: dict[str, int]

    def log_probs(self, context_ids: np.ndarray) -> np.ndarray:
        """(len(context_ids), |V|) array of log P_s(. | c)."""
        ...


class _ContextModelBase:
    words: list[str]
    word_to_id: dict[str, int]

    def ids(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.word_to_id.get(t, UNK_ID) for t in tokens], dtype=np.int64)


class TableContextModel(_ContextModelBase):
    """Context model backed by an explicit |V| x |V| table of log P_s(w | c) (rows = c)."""

    def __init__(self, words: Sequence[str], log_table: np.ndarray):
        self.words = list(words)
        self.word_to_id = {w: i for i, w in enumerate(self.words)}
        self.log_table = np.asarray(log_table, dtype=np.float64)

    def log_probs(self, context_ids: np.ndarray) -> np.ndarray:
        return self.log_table[np.asarray(context_ids)]


class SkipGramModel(_ContextModelBase):
    """Skip-gram embeddings; P_s(w | c) is the full softmax of out_vectors @ in_vectors[c]."""

    def __init__(self, words: Sequence[str], in_vectors: np.ndarray, out_vectors: np.ndarray, window: int):
        self.words = list(words)
        self.word_to_id = {w: i for i, w in enumerate(self.words)}
        self.in_vectors = np.asarray(in_vectors, dtype=np.float32)
        self.out_vectors = np.asarray(out_vectors, dtype=np.float32)
        self.window = window

    @property
    def dim(self) -> int:
        return self.in_vectors.shape[1]

    def log_probs(self, context_ids: np.ndarray) -> np.ndarray:
        scores = torch.from_numpy(self.in_vectors[np.asarray(context_ids)] @ self.out_vectors.T)
        return torch.log_softmax(scores.double(), dim=-1).numpy()

    def save(self, path: str | os.PathLike) -> None:
        np.savez(
            path, words=np.array(self.words, dtype=object), in_vectors=self.in_vectors,
            out_vectors=self.out_vectors, window=self.window,
        )

    @classmethod
    def load(cls, path: str | os.PathLike) -> "SkipGramModel":
        with np.load(path, allow_pickle=True) as d:
            return cls(list(d["words"]), d["in_vectors"], d["out_vectors"], int(d["window"]))


def _skipgram_pairs(id_lists: Iterable[np.ndarray], window: int) -> tuple[np.ndarray, np.ndarray]:
    centers, contexts = [], []
    for ids in id_lists:
        L = len(ids)
        for k in range(1, window + 1):
            if L > k:
                centers += [ids[:-k], ids[k:]]
                contexts += [ids[k:], ids[:-k]]
    if not centers:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(centers), np.concatenate(contexts)


def train_skipgram(
    corpus: Sequence[Sequence[str]],
    vocab: Vocabulary | None = None,
    window: int = 2,
    dim: int = 64,
    epochs: int = 5,
    negatives: int = 5,
    lr: float = 0.01,
    batch_size: int = 4096,
    seed: int = 0,
) -> SkipGramModel:
    """Negative-sampling skip-gram over windows of radius ``window``."""
    if window < 1:
        raise ValueError("window radius must be >= 1")
    corpus = [list(t) for t in corpus if len(t)]
    if not corpus:
        raise ValueError("empty corpus: cannot train a skip-gram model")
    vocab = vocab or build_vocab(corpus)
    V = len(vocab)
    id_lists = [np.array([vocab.word_id(t) for t in toks], dtype=np.int64) for toks in corpus]
    centers, contexts = _skipgram_pairs(id_lists, window)

    counts = np.bincount(np.concatenate(id_lists), minlength=V).astype(np.float64)
    noise = counts ** 0.75
    noise[[PAD_ID]] = 0.0
    noise = torch.from_numpy(noise / noise.sum())

    gen = torch.Generator().manual_seed(seed)
    in_emb = torch.nn.Parameter((torch.rand(V, dim, generator=gen) - 0.5) / dim)
    out_emb = torch.nn.Parameter(torch.zeros(V, dim))
    opt = torch.optim.Adam([in_emb, out_emb], lr=lr)
    c_all = torch.from_numpy(centers)
    o_all = torch.from_numpy(contexts)
    for _ in range(epochs):
        if len(c_all) == 0:
            break
        perm = torch.randperm(len(c_all), generator=gen)
        for start in range(0, len(perm), batch_size):
            idx = perm[start : start + batch_size]
            c, o = c_all[idx], o_all[idx]
            neg = torch.multinomial(noise, len(idx) * negatives, replacement=True, generator=gen)
            neg = neg.view(len(idx), negatives)
            vc = in_emb[c]
            pos_score = (vc * out_emb[o]).sum(-1)
            neg_score = torch.bmm(out_emb[neg], vc.unsqueeze(-1)).squeeze(-1)
            loss = -(F.logsigmoid(pos_score) + F.logsigmoid(-neg_score).sum(-1)).mean()
            opt.zero_grad()
            loss.backward()
            opt.step()
    return SkipGramModel(vocab.words, in_emb.detach().numpy(), out_emb.detach().numpy(), window)


def window_positions(i: int, length: int, n: int) -> range:
    """Positions i-n..i+n clipped to the title; includes i itself."""
    return range(max(0, i - n), min(length, i + n + 1))


def replacement_score(w: str, context: Sequence[str], model: ContextModel) -> float:
    """sum over context tokens c of -log P_s(w | c), probabilities floored at 1e-9."""
    ids = np.array([model.word_to_id.get(c, UNK_ID) for c in context], dtype=np.int64)
    w_id = model.word_to_id.get(w, UNK_ID)
    logp = np.maximum(model.log_probs(ids)[:, w_id], LOG_PROB_FLOOR)
    return float(-logp.sum())


def _candidate_ids(vocab_size: int) -> np.ndarray:
    ids = np.arange(vocab_size)
    return ids[(ids != PAD_ID) & (ids != UNK_ID)]


def select_replacements(
    positions: Sequence[int],
    tokens: Sequence[str],
    model: ContextModel,
    window: int = 2,
    candidate_limit: int | None = None,
) -> dict[int, str]:
    """Replacement token for each position in ``positions`` (see :func:`select_replacement`)."""
    L = len(tokens)
    ids = np.array([model.word_to_id.get(t, UNK_ID) for t in tokens], dtype=np.int64)
    uniq, inverse = np.unique(ids, return_inverse=True)
    neg_logp = -np.maximum(model.log_probs(uniq), LOG_PROB_FLOOR)  # (U, |V|)
    base = _candidate_ids(neg_logp.shape[1])
    out = {}
    for i in positions:
        if not 0 <= i < L:
            raise IndexError(f"position {i} outside title of length {L}")
        win = list(window_positions(i, L, window))
        excluded = np.isin(base, ids[win])
        cand = base[~excluded]
        if candidate_limit is not None:
            cand = cand[:candidate_limit]
        if cand.size == 0:
            raise ValueError("no replacement candidates: vocabulary exhausted by the window")
        scores = neg_logp[inverse[win]][:, cand].sum(axis=0)
        out[i] = model.words[int(cand[np.argmin(scores)])]
    return out


def select_replacement(
    i: int,
    tokens: Sequence[str],
    model: ContextModel,
    window: int = 2,
    candidate_limit: int | None = None,
) -> str:
    """argmin over V' of the summed -log P_s(w | w_{i+k}), k = -n..n.

    V' is the vocabulary minus every token in the window (the original token
    included) and minus PAD/UNK. Ties go to the lowest id, i.e. the most
    frequent word. ``candidate_limit`` keeps only that many most-frequent
    members of V'.
    """
    return select_replacements([i], tokens, model, window, candidate_limit)[i]


@dataclass
class CorruptionPlan:
    tokens: list[str]
    rounds: list[list[int]]
    replacements: list[dict[int, str]] = field(default_factory=list)


@dataclass
class PretrainExample:
    tokens: list[str]
    labels: list[int]

    def to_record(self) -> dict:
        return {"tokens": self.tokens, "labels": self.labels}

    @classmethod
    def from_record(cls, rec: dict) -> "PretrainExample":
        return cls(list(rec["tokens"]), [int(v) for v in rec["labels"]])


def num_rounds(f: float) -> int:
    # tolerate float noise such as 1 / (1/3)
    return math.ceil(round(1.0 / f, 9))


def plan_corruption(tokens: Sequence[str], f: float, seed: int | np.random.Generator = 0) -> CorruptionPlan:
    """Randomly partition all positions into ceil(1/f) near-equal disjoint rounds.

    Titles shorter than ceil(1/f) get one single-position round per token.
    """
    if not 0 < f <= 1:
        raise ValueError(f"corruption fraction must lie in (0, 1], got {f}")
    L = len(tokens)
    if L < 1:
        raise ValueError("cannot corrupt an empty title")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    perm = rng.permutation(L)
    parts = np.array_split(perm, min(num_rounds(f), L))
    return CorruptionPlan(list(tokens), [sorted(int(p) for p in part) for part in parts])


def fill_replacements(
    plan: CorruptionPlan, model: ContextModel, window: int = 2, candidate_limit: int | None = None
) -> CorruptionPlan:
    every = [p for r in plan.rounds for p in r]
    chosen = select_replacements(every, plan.tokens, model, window, candidate_limit)
    plan.replacements = [{p: chosen[p] for p in r} for r in plan.rounds]
    return plan


def plan_examples(plan: CorruptionPlan) -> list[PretrainExample]:
    """The clean copy followed by one corrupted copy per round."""
    L = len(plan.tokens)
    out = [PretrainExample(list(plan.tokens), [0] * L)]
    for repl in plan.replacements:
        toks = list(plan.tokens)
        labels = [0] * L
        for p, w in repl.items():
            toks[p] = w
            labels[p] = 1
        out.append(PretrainExample(toks, labels))
    return out


def build_pretraining_corpus(
    titles: Iterable[Sequence[str]],
    model: ContextModel,
    f: float = 0.25,
    seed: int = 0,
    window: int = 2,
    max_len: int | None = 35,
    candidate_limit: int | None = None,
) -> Iterator[PretrainExample]:
    """Per title: one clean copy plus one corrupted copy per round.

    Titles are truncated to ``max_len`` before corruption. Each title uses its
    own RNG stream derived from (seed, index), so output does not depend on
    how the stream is consumed.
    """
    for idx, toks in enumerate(titles):
        toks = list(toks)[:max_len] if max_len else list(toks)
        if not toks:
            continue
        plan = plan_corruption(toks, f, np.random.default_rng([seed, idx]))
        fill_replacements(plan, model, window, candidate_limit)
        yield from plan_examples(plan)


def pretrain_class_weights(median_len: float, f: float, max_len: int) -> LossWeights:
    """alpha = median_len * f / N (expected share of replaced positions), beta = 1 - alpha."""
    if median_len <= 0 or f <= 0 or max_len <= 0:
        raise ValueError("median_len, f and max_len must be positive")
    alpha = median_len * f / max_len
    if not 0 < alpha < 1:
        raise ValueError(f"class weight alpha={alpha:.4f} outside (0, 1)")
    return LossWeights(alpha, 1.0 - alpha)


def cmd_gen(
    titles_path: str, out_path: str, f: float, window: int, seed: int,
    skipgram_path: str | None = None, max_len: int = 35, candidate_limit: int | None = 10_000,
    sg_dim: int = 64, sg_epochs: int = 5,
) -> int:
    titles = [prepare(r["long"]) for r in read_jsonl(titles_path)]
    if skipgram_path:
        model = SkipGramModel.load(skipgram_path)
    else:
        model = train_skipgram(titles, window=window, dim=sg_dim, epochs=sg_epochs, seed=seed)
    examples = build_pretraining_corpus(titles, model, f, seed, window, max_len, candidate_limit)
    records = [ex.to_record() for ex in examples]
    write_jsonl(out_path, records)
    return len(records)


def main(argv: Sequence[str] | None = None) -> None:
    ap = argparse.ArgumentParser(prog="pretrain")
    sub = ap.add_subparsers(dest="cmd", required=True)
    gen = sub.add_parser("gen")
    gen.add_argument("--titles", required=True)
    gen.add_argument("--f", type=float, default=0.25)
    gen.add_argument("--window", type=int, default=2)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--skipgram", default=None)
    gen.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    n = cmd_gen(args.titles, args.out, args.f, args.window, args.seed, args.skipgram)
    print(f"wrote {n} examples to {args.out}")


if __name__ == "__main__":
    main()
