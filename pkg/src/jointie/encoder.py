"""Contextual token encoder: vocabulary plus a small trainable transformer.

The encoder fills the role a pretrained BERT plays at full scale. It is a
pre-norm transformer stack with learned token and position embeddings.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import torch
from torch import nn
import torch.nn.functional as F

PAD, UNK, NULL = "[PAD]", "[UNK]", "[NULL]"
RESERVED = (PAD, UNK, NULL)
PAD_ID, UNK_ID, NULL_ID = 0, 1, 2


class EncoderInputError(ValueError):
    """Input sequence too long or token id outside the vocabulary."""


class Vocabulary:
    def __init__(self, tokens: Sequence[str]):
        self.itos = list(tokens)
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate vocabulary entries")

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.stoi.get(t, UNK_ID) for t in tokens]

    def extended(self, tokens: Iterable[str]) -> Vocabulary:
        new = list(self.itos)
        for t in tokens:
            if t not in self.stoi and t not in new:
                new.append(t)
        return Vocabulary(new)


def build_vocab(corpus, min_count: int = 1) -> Vocabulary:
    """Map every token seen at least ``min_count`` times to an id.

    ``corpus`` holds Documents (or plain token lists). Ids 0-2 are reserved
    for PAD, UNK and the NULL sentinel. Ids are assigned by descending
    frequency, ties broken alphabetically, so the map is deterministic.
    """
    counts = Counter()
    for doc in corpus:
        counts.update(getattr(doc, "tokens", doc))
    kept = sorted((t for t, c in counts.items() if c >= min_count and t not in RESERVED),
                  key=lambda t: (-counts[t], t))
    return Vocabulary(list(RESERVED) + kept)


@dataclass
class ToyTransformerConfig:
    vocab_size: int
    embed_dim: int = 64
    num_layers: int = 2
    num_heads: int = 4
    feedforward_dim: int = 128
    max_position: int = 384
    dropout: float = 0.0
    parameter_init_seed: int = 0

    def __post_init__(self):
        for name in ("vocab_size", "embed_dim", "num_layers", "num_heads",
                     "feedforward_dim", "max_position"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.embed_dim % self.num_heads:
            raise ValueError("embed_dim must be divisible by num_heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    def to_dict(self):
        return asdict(self)


class SelfAttention(nn.Module):
    def __init__(self, dim, heads, dropout):
        super().__init__()
        self.heads = heads
        self.wq = nn.Linear(dim, dim)
        self.wk = nn.Linear(dim, dim)
        self.wv = nn.Linear(dim, dim)
        self.wo = nn.Linear(dim, dim)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, key_mask):
        b, t, c = x.shape
        hd = c // self.heads

        def split(y):
            return y.view(b, t, self.heads, hd).transpose(1, 2)

        q, k, v = split(self.wq(x)), split(self.wk(x)), split(self.wv(x))
        scores = q @ k.transpose(-1, -2) / math.sqrt(hd)
        scores = scores.masked_fill(~key_mask[:, None, None, :], torch.finfo(x.dtype).min)
        attn = self.dropout(torch.softmax(scores, dim=-1))
        out = (attn @ v).transpose(1, 2).reshape(b, t, c)
        return self.wo(out)


class EncoderLayer(nn.Module):
    def __init__(self, cfg: ToyTransformerConfig):
        super().__init__()
        self.norm1 = nn.LayerNorm(cfg.embed_dim)
        self.attn = SelfAttention(cfg.embed_dim, cfg.num_heads, cfg.dropout)
        self.norm2 = nn.LayerNorm(cfg.embed_dim)
        self.ff1 = nn.Linear(cfg.embed_dim, cfg.feedforward_dim)
        self.ff2 = nn.Linear(cfg.feedforward_dim, cfg.embed_dim)
        self.dropout = nn.Dropout(cfg.dropout)

    def forward(self, x, key_mask):
        x = x + self.dropout(self.attn(self.norm1(x), key_mask))
        x = x + self.dropout(self.ff2(F.gelu(self.ff1(self.norm2(x)))))
        return x


class ToyTransformerEncoder(nn.Module):
    """Pre-norm transformer encoder over window-local positions.

    ``sequences_encoded`` counts every sequence pushed through the stack,
    which is the quantity compared between the joint and pairwise models.
    """

    def __init__(self, cfg: ToyTransformerConfig):
        super().__init__()
        self.config = cfg
        self.token_embedding = nn.Embedding(cfg.vocab_size, cfg.embed_dim)
        self.position_embedding = nn.Embedding(cfg.max_position, cfg.embed_dim)
        for i in range(cfg.num_layers):
            self.add_module(f"layer{i}", EncoderLayer(cfg))
        self.final_norm = nn.LayerNorm(cfg.embed_dim)
        self.dropout = nn.Dropout(cfg.dropout)
        self.sequences_encoded = 0
        self.reset_parameters()

    @property
    def output_dim(self):
        return self.config.embed_dim

    @property
    def max_input_length(self):
        return self.config.max_position

    def reset_parameters(self):
        gen = torch.Generator().manual_seed(self.config.parameter_init_seed)
        with torch.no_grad():
            for name, p in self.named_parameters():
                if "norm" in name:
                    p.fill_(1.0 if name.endswith("weight") else 0.0)
                elif name.endswith("bias"):
                    p.zero_()
                else:
                    p.copy_(torch.randn(p.shape, generator=gen, dtype=p.dtype) * 0.02)

    def layers(self):
        return [getattr(self, f"layer{i}") for i in range(self.config.num_layers)]

    def forward(self, ids: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
        """Encode a padded batch ``ids`` of shape (batch, length)."""
        if ids.dim() != 2:
            raise EncoderInputError("expected a (batch, length) id tensor")
        b, t = ids.shape
        if t > self.config.max_position:
            raise EncoderInputError(
                f"sequence of {t} tokens exceeds max_position {self.config.max_position}; window it first")
        if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= self.config.vocab_size):
            raise EncoderInputError(f"token id outside vocabulary of {self.config.vocab_size}")
        if mask is None:
            mask = torch.ones_like(ids, dtype=torch.bool)
        self.sequences_encoded += b
        pos = torch.arange(t, device=ids.device)
        x = self.token_embedding(ids) + self.position_embedding(pos)[None]
        x = self.dropout(x)
        for layer in self.layers():
            x = layer(x, mask)
        return self.final_norm(x)

    def encode(self, token_ids: Sequence[int], train_mode: bool = False) -> torch.Tensor:
        """Encode one sequence, returning a (k, c) matrix."""
        was_training = self.training
        self.train(train_mode)
        try:
            ids = torch.as_tensor(list(token_ids), dtype=torch.long)[None]
            with torch.set_grad_enabled(train_mode):
                return self.forward(ids)[0]
        finally:
            self.train(was_training)
