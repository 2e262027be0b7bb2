"""Point-wise classifier, weighted binary cross-entropy, and label decoding."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn

PROB_CLAMP = 1e-7


@dataclass(frozen=True)
class LossWeights:
    """``alpha`` multiplies the label-1 log term and ``beta`` the label-0 term."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise ValueError(f"loss weights must lie in [0, 1], got {self.alpha}, {self.beta}")
        if abs(self.alpha + self.beta - 1.0) > 1e-9:
            raise ValueError(f"loss weights must sum to 1, got {self.alpha} + {self.beta}")

    def swapped(self) -> "LossWeights":
        return LossWeights(self.beta, self.alpha)


class Classifier(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.linear = nn.Linear(dim, 2)  # W_c^T x + b_c

    def forward(self, x_enc: torch.Tensor) -> torch.Tensor:
        """Per-position probability pairs, shape (..., 2)."""
        return torch.softmax(self.linear(x_enc), dim=-1)


def weighted_bce(
    y: torch.Tensor,
    labels: torch.Tensor,
    mask: torch.Tensor,
    weights: LossWeights,
) -> torch.Tensor:
    """-(1/N_valid) sum_i [alpha * t_i log y_i + beta * (1 - t_i) log(1 - y_i)] over unmasked i.

    ``y`` holds class-1 probabilities.
    """
    n_valid = mask.sum()
    if n_valid == 0:
        raise ValueError("weighted_bce needs at least one unmasked position")
    y = y.clamp(PROB_CLAMP, 1 - PROB_CLAMP)
    t = labels.to(y.dtype)
    per_tok = weights.alpha * t * torch.log(y) + weights.beta * (1 - t) * torch.log1p(-y)
    return -(per_tok * mask.to(y.dtype)).sum() / n_valid


def predict_labels(y1: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
    """1 where the class-1 probability ``y1`` is >= 0.5 (ties keep the token); PAD forced to 0."""
    out = (y1 >= 0.5).long()
    if mask is not None:
        out = out * mask.long()
    return out


def extract_short_title(tokens: Sequence[str], labels: Sequence[int]) -> str:
    if len(labels) < len(tokens):
        raise ValueError("fewer labels than tokens")
    return " ".join(tok for tok, keep in zip(tokens, labels) if keep)
