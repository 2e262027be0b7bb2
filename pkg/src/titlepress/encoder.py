"""Stacked BiLSTM encoder with multiplicative self-attention and its ablation variants."""

from __future__ import annotations

import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .config import ModelConfig


def masked_softmax(logits: torch.Tensor, allowed: torch.Tensor) -> torch.Tensor:
    """Softmax over the last axis restricted to ``allowed`` entries.

    Disallowed entries get exactly zero weight; rows with nothing allowed
    come back all-zero instead of NaN.
    """
    filled = logits.masked_fill(~allowed, torch.finfo(logits.dtype).min)
    weights = torch.softmax(filled, dim=-1)
    return weights * allowed.to(weights.dtype)


class BiLSTMStack(nn.Module):
    """Bidirectional LSTM layers run over packed sequences, so PAD steps never enter the recurrence."""

    def __init__(self, input_dim: int, hidden: int, num_layers: int, dropout: float):
        super().__init__()
        self.layers = nn.ModuleList(
            nn.LSTM(input_dim if k == 0 else 2 * hidden, hidden, batch_first=True, bidirectional=True)
            for k in range(num_layers)
        )
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        n = x.shape[1]
        lengths = mask.sum(dim=1).cpu()
        if (lengths == 0).any():
            raise ValueError("every sequence needs at least one real token")
        for k, lstm in enumerate(self.layers):
            if k > 0:
                x = self.dropout(x)
            packed = pack_padded_sequence(x, lengths, batch_first=True, enforce_sorted=False)
            out, _ = lstm(packed)
            x, _ = pad_packed_sequence(out, batch_first=True, total_length=n)
        return x


class SelfAttention(nn.Module):
    """Bilinear self-attention e_ij = x_i^T W_s x_j, optionally windowed or multi-headed.

    ``window`` restricts position i to keys with |i - j| <= window // 2.
    With ``heads`` > 1 the feature axis is split evenly and each head has
    its own square bilinear matrix.
    """

    def __init__(self, dim: int, heads: int = 1, window: int | None = None):
        super().__init__()
        if dim % heads:
            raise ValueError("dim must be divisible by heads")
        self.heads = heads
        self.window = window
        d = dim // heads
        self.W_s = nn.Parameter(torch.empty(heads, d, d) if heads > 1 else torch.empty(dim, dim))

    def attention_weights(self, x_b: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """Returns alpha with shape (B, N, N), or (B, heads, N, N) when multi-headed."""
        if not mask.any(dim=1).all():
            raise ValueError("self-attention needs at least one unmasked position per sequence")
        n = x_b.shape[1]
        allowed = mask[:, None, :].expand(-1, n, -1)
        if self.window is not None:
            idx = torch.arange(n, device=x_b.device)
            band = (idx[:, None] - idx[None, :]).abs() <= self.window // 2
            allowed = allowed & band
        if self.heads == 1:
            logits = x_b @ self.W_s @ x_b.transpose(1, 2)
        else:
            b = x_b.shape[0]
            xh = x_b.reshape(b, n, self.heads, -1).transpose(1, 2)  # (B, H, N, d)
            logits = torch.einsum("bhid,hde,bhje->bhij", xh, self.W_s, xh)
            allowed = allowed[:, None]
        return masked_softmax(logits, allowed)

    def forward(self, x_b: torch.Tensor, mask: torch.Tensor, return_weights: bool = False):
        alpha = self.attention_weights(x_b, mask)
        if self.heads == 1:
            x_enc = alpha @ x_b
        else:
            b, n, _ = x_b.shape
            xh = x_b.reshape(b, n, self.heads, -1).transpose(1, 2)
            x_enc = (alpha @ xh).transpose(1, 2).reshape(b, n, -1)
        return (x_enc, alpha) if return_weights else x_enc


class Encoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.input_dropout = nn.Dropout(config.dropout)
        self.rnn = BiLSTMStack(config.embed_dim, config.hidden, config.num_recurrent_layers, config.dropout)
        dim = 2 * config.hidden
        if config.attention == "none":
            self.attention = None
        elif config.attention == "global":
            self.attention = SelfAttention(dim)
        elif config.attention == "narrow":
            self.attention = SelfAttention(dim, window=config.attention_window)
        else:
            self.attention = SelfAttention(dim, heads=config.attention_heads)
        self.attn_dropout = nn.Dropout(config.dropout)

    def forward(self, x_emb: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        x_b = self.rnn(self.input_dropout(x_emb), mask)
        if self.attention is None:
            return x_b
        return self.attention(self.attn_dropout(x_b), mask)
