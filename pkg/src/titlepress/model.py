"""Full sequence labeler: embedder -> encoder -> point-wise classifier."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
import torch
from torch import nn

from .config import ModelConfig
from .corpus import EncodedDataset
from .embedder import Embedder
from .encoder import Encoder
from .head_loss import Classifier, LossWeights, weighted_bce


class Batch(NamedTuple):
    x_w: torch.Tensor
    x_c: torch.Tensor
    mask: torch.Tensor
    labels: torch.Tensor


def make_batch(ds: EncodedDataset, idx=None, device: torch.device | str = "cpu") -> Batch:
    if idx is None:
        idx = np.arange(len(ds))
    return Batch(
        torch.as_tensor(ds.x_w[idx], device=device),
        torch.as_tensor(ds.x_c[idx], device=device),
        torch.as_tensor(ds.mask[idx], device=device),
        torch.as_tensor(ds.labels[idx], device=device),
    )


class TitleCompressor(nn.Module):
    def __init__(self, config: ModelConfig, word_vectors: np.ndarray | torch.Tensor, num_chars: int):
        super().__init__()
        self.config = config
        self.num_chars = num_chars
        self.embedder = Embedder(config, word_vectors, num_chars)
        self.encoder = Encoder(config)
        self.head_dropout = nn.Dropout(config.dropout)
        self.classifier = Classifier(2 * config.hidden)
        self.reset_parameters()

    def reset_parameters(self) -> None:
        r = self.config.init_range
        for name, p in self.named_parameters():
            if name.startswith("embedder.highway") or name.startswith("embedder.char_cnn.char_table"):
                if name.endswith("bias"):
                    nn.init.zeros_(p)
                else:
                    nn.init.uniform_(p, -r, r)
            elif "bias" in name:
                nn.init.zeros_(p)
            elif p.dim() >= 2:
                nn.init.xavier_normal_(p)

    def forward(self, x_w: torch.Tensor, x_c: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """Class probabilities, shape (B, N, 2)."""
        x_emb = self.embedder(x_w, x_c)
        x_enc = self.encoder(x_emb, mask)
        return self.classifier(self.head_dropout(x_enc))

    def loss(self, batch: Batch, weights: LossWeights) -> torch.Tensor:
        y = self(batch.x_w, batch.x_c, batch.mask)[..., 1]
        return weighted_bce(y, batch.labels, batch.mask, weights)

    def layer_groups(self) -> list[tuple[str, list[nn.Parameter]]]:
        """Trainable parameter groups ordered top-down, for gradual unfreezing."""
        groups = [("classifier", list(self.classifier.parameters()))]
        if self.encoder.attention is not None:
            groups.append(("attention", list(self.encoder.attention.parameters())))
        for k in reversed(range(len(self.encoder.rnn.layers))):
            groups.append((f"recurrent{k + 1}", list(self.encoder.rnn.layers[k].parameters())))
        groups.append(("embedding", list(self.embedder.parameters())))
        return groups

    def num_trainable(self) -> int:
        return sum(p.numel() for p in self.parameters())
