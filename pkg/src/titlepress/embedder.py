"""Hybrid word representation: frozen word vectors + character CNN, fused by a highway net."""

from __future__ import annotations

import os
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .config import ModelConfig
from .corpus import PAD_ID, UNK_ID, Vocabulary


def load_word_vectors(path: str | os.PathLike, vocab: Vocabulary, dim: int) -> tuple[np.ndarray, int]:
    """Read ``word v1 ... v_dim`` lines into a |V| x dim table aligned with ``vocab``.

    Vocabulary words without a vector share the UNK row, which is the mean of
    the vectors that were found. The PAD row is zero. Returns the table and
    the number of missing words.
    """
    table = np.zeros((len(vocab), dim), dtype=np.float32)
    found = np.zeros(len(vocab), dtype=bool)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip().split(" ")
            if len(parts) != dim + 1:
                if lineno == 1 and len(parts) == 2:  # word2vec-style header
                    continue
                raise ValueError(f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}")
            idx = vocab.word_to_id.get(parts[0])
            if idx is None or idx in (PAD_ID, UNK_ID):
                continue
            table[idx] = np.asarray(parts[1:], dtype=np.float32)
            found[idx] = True
    return _fill_unknown(table, found)


def random_word_vectors(vocab: Vocabulary, dim: int, seed: int = 0, scale: float = 0.3) -> np.ndarray:
    """Stand-in for pre-trained vectors when none are supplied."""
    rng = np.random.default_rng(seed)
    table = rng.normal(0.0, scale, size=(len(vocab), dim)).astype(np.float32)
    found = np.ones(len(vocab), dtype=bool)
    found[[PAD_ID, UNK_ID]] = False
    return _fill_unknown(table, found)[0]


def _fill_unknown(table: np.ndarray, found: np.ndarray) -> tuple[np.ndarray, int]:
    unk = table[found].mean(axis=0) if found.any() else np.zeros(table.shape[1], table.dtype)
    missing = ~found
    missing[PAD_ID] = False
    table[missing] = unk
    table[PAD_ID] = 0.0
    return table, int(missing.sum()) - 1  # UNK itself is not a missing word


def save_word_vectors(path: str | os.PathLike, words: Sequence[str], table: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for w, row in zip(words, table):
            fh.write(w + " " + " ".join(f"{v:.6f}" for v in row) + "\n")


class CharCNN(nn.Module):
    def __init__(self, num_chars: int, e_cin: int, e_char: int, width: int):
        super().__init__()
        self.char_table = nn.Embedding(num_chars, e_cin)
        self.conv = nn.Conv1d(e_cin, e_char, width, padding=width // 2)

    def forward(self, x_c: torch.Tensor) -> torch.Tensor:
        # x_c: (..., C) -> (..., e_char)
        lead = x_c.shape[:-1]
        chars = self.char_table(x_c.reshape(-1, x_c.shape[-1]))  # (B, C, e_cin)
        feats = torch.tanh(self.conv(chars.transpose(1, 2)))  # (B, e_char, C')
        return feats.max(dim=-1).values.reshape(*lead, -1)


class Highway(nn.Module):
    """y = g * relu(W_h x + b_h) + (1 - g) * x with g = sigmoid(W_g x + b_g)."""

    def __init__(self, dim: int, num_layers: int):
        super().__init__()
        self.transforms = nn.ModuleList(nn.Linear(dim, dim) for _ in range(num_layers))
        self.gates = nn.ModuleList(nn.Linear(dim, dim) for _ in range(num_layers))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for transform, gate in zip(self.transforms, self.gates):
            g = torch.sigmoid(gate(x))
            x = g * F.relu(transform(x)) + (1 - g) * x
        return x


class Embedder(nn.Module):
    def __init__(self, config: ModelConfig, word_vectors: np.ndarray | torch.Tensor, num_chars: int):
        super().__init__()
        word_vectors = torch.as_tensor(np.asarray(word_vectors, dtype=np.float32))
        if word_vectors.shape[1] != config.e_word:
            raise ValueError(f"word vectors have dim {word_vectors.shape[1]}, config says {config.e_word}")
        self.config = config
        # A buffer, not a parameter: the table never receives gradients or updates.
        self.register_buffer("word_table", word_vectors.clone())
        self.char_cnn = (
            CharCNN(num_chars, config.e_cin, config.e_char, config.conv_width)
            if config.use_char_cnn else None
        )
        self.highway = Highway(config.embed_dim, config.highway_layers)

    @property
    def vocab_size(self) -> int:
        return self.word_table.shape[0]

    def word_embed(self, x_w: torch.Tensor) -> torch.Tensor:
        if x_w.numel() and (x_w.min() < 0 or x_w.max() >= self.vocab_size):
            raise IndexError(f"word id out of range for vocabulary of size {self.vocab_size}")
        return F.embedding(x_w, self.word_table)

    def char_cnn_embed(self, x_c: torch.Tensor) -> torch.Tensor:
        if self.char_cnn is None:
            raise RuntimeError("character CNN disabled in this configuration")
        return self.char_cnn(x_c)

    def highway_combine(self, c: torch.Tensor | None, w: torch.Tensor) -> torch.Tensor:
        x = w if c is None else torch.cat([c, w], dim=-1)
        return self.highway(x)

    def forward(self, x_w: torch.Tensor, x_c: torch.Tensor) -> torch.Tensor:
        if x_c.shape[:-1] != x_w.shape:
            raise ValueError(f"shape mismatch: x_w {tuple(x_w.shape)} vs x_c {tuple(x_c.shape)}")
        w = self.word_embed(x_w)
        c = self.char_cnn_embed(x_c) if self.char_cnn is not None else None
        return self.highway_combine(c, w)
