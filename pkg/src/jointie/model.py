"""Networks: the joint span+BIO model and the pairwise (field, document) baseline.

Both consume documents prefixed with the NULL sentinel and split into
stride windows; per-token vectors are averaged over windows before any
head sees them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn
import torch.nn.functional as F

from .encoder import NULL_ID, PAD_ID, ToyTransformerConfig, ToyTransformerEncoder, Vocabulary
from .heads import NerHead, SpanHead
from .losses import LossCombiner, ner_loss, span_loss
from .windowing import WindowPlan, average_windows, plan_windows


@dataclass(frozen=True)
class DocInput:
    """Sentinel-prefixed token ids and their window plan."""

    ids: tuple[int, ...]
    plan: WindowPlan

    @property
    def n(self):
        return len(self.ids) - 1


def featurize(tokens: Sequence[str], vocab: Vocabulary, window_length: int, stride: int) -> DocInput:
    ids = (NULL_ID,) + tuple(vocab.encode(tokens))
    return DocInput(ids, plan_windows(len(ids), window_length, stride))


def _pad(seqs: list[list[int]]):
    width = max(len(s) for s in seqs)
    ids = torch.full((len(seqs), width), PAD_ID, dtype=torch.long)
    mask = torch.zeros((len(seqs), width), dtype=torch.bool)
    for r, s in enumerate(seqs):
        ids[r, :len(s)] = torch.as_tensor(s, dtype=torch.long)
        mask[r, :len(s)] = True
    return ids, mask


def _stack_docs(per_doc: list[torch.Tensor]):
    """Pad (n_k+1, c) matrices to one (B, T, c) tensor plus a position mask."""
    width = max(h.shape[0] for h in per_doc)
    h = torch.stack([F.pad(x, (0, 0, 0, width - x.shape[0])) for x in per_doc])
    mask = torch.zeros(h.shape[:2], dtype=torch.bool)
    for r, x in enumerate(per_doc):
        mask[r, :x.shape[0]] = True
    return h, mask


class JointNetwork(nn.Module):
    """Shared encoder, field span head and BIO head trained together."""

    def __init__(self, encoder_config: ToyTransformerConfig, m: int, span_depth: int = 1,
                 loss_mode: str = "sum", alpha_init: float = 0.5, use_ner: bool = True):
        super().__init__()
        self.m = m
        self.use_ner = use_ner
        self.encoder = ToyTransformerEncoder(encoder_config)
        c = encoder_config.embed_dim
        self.span = SpanHead(m, c, depth=span_depth)
        self.ner = NerHead(m, c)
        self.combiner = LossCombiner(loss_mode, alpha_init)
        gen = torch.Generator().manual_seed(encoder_config.parameter_init_seed + 1)
        self.span.reset_parameters(gen)
        self.ner.reset_parameters(gen)

    def encode(self, docs: Sequence[DocInput]):
        """One encoder call over every window of every document in ``docs``."""
        seqs, owners = [], []
        for k, d in enumerate(docs):
            for a, b in d.plan.windows:
                seqs.append(list(d.ids[a:b + 1]))
                owners.append(k)
        ids, mask = _pad(seqs)
        out = self.encoder(ids, mask)
        per_doc, row = [], 0
        for d in docs:
            w = len(d.plan)
            per_doc.append(average_windows(list(out[row:row + w]), d.plan))
            row += w
        return _stack_docs(per_doc)

    def forward(self, docs: Sequence[DocInput]):
        h, mask = self.encode(docs)
        start, end = self.span(h, mask)
        ner = self.ner(h[:, 1:]) if self.use_ner else None
        return {"start": start, "end": end, "ner": ner, "mask": mask}

    def loss(self, out, span_targets: torch.Tensor, bio: torch.Tensor | None):
        l_span = span_loss(out["start"], out["end"], span_targets)
        if not self.use_ner:
            return l_span, l_span, torch.zeros_like(l_span)
        l_ner = ner_loss(out["ner"], bio, out["mask"][:, 1:])
        return self.combiner(l_span, l_ner), l_span, l_ner


class PairwiseNetwork(nn.Module):
    """QA-style baseline: every (field, window) pair is its own encoder input.

    The field's name tokens and a separator precede each document window.
    Start/end scores come from one shared projection vector each.
    """

    def __init__(self, encoder_config: ToyTransformerConfig, field_prefixes: Sequence[Sequence[int]]):
        super().__init__()
        self.m = len(field_prefixes)
        self.prefixes = [tuple(p) for p in field_prefixes]
        self.encoder = ToyTransformerEncoder(encoder_config)
        c = encoder_config.embed_dim
        self.start = nn.Parameter(torch.empty(c))
        self.end = nn.Parameter(torch.empty(c))
        gen = torch.Generator().manual_seed(encoder_config.parameter_init_seed + 1)
        with torch.no_grad():
            self.start.copy_(torch.randn(c, generator=gen) * 0.02)
            self.end.copy_(torch.randn(c, generator=gen) * 0.02)
        self.use_ner = False

    def encode(self, docs: Sequence[DocInput]):
        seqs = []
        for d in docs:
            for prefix in self.prefixes:
                for a, b in d.plan.windows:
                    seqs.append(list(prefix) + list(d.ids[a:b + 1]))
        ids, mask = _pad(seqs)
        out = self.encoder(ids, mask)
        per_doc, row = [], 0
        for d in docs:
            fields = []
            for prefix in self.prefixes:
                w, skip = len(d.plan), len(prefix)
                fields.append(average_windows([r[skip:] for r in out[row:row + w]], d.plan))
                row += w
            per_doc.append(torch.stack(fields))  # (m, n+1, c)
        width = max(x.shape[1] for x in per_doc)
        h = torch.stack([F.pad(x, (0, 0, 0, width - x.shape[1])) for x in per_doc])
        mask = torch.zeros((len(docs), width), dtype=torch.bool)
        for r, d in enumerate(docs):
            mask[r, :len(d.ids)] = True
        return h, mask

    def forward(self, docs: Sequence[DocInput]):
        h, mask = self.encode(docs)
        fill = ~mask[:, None, :]
        start = (h @ self.start).masked_fill(fill, float("-inf"))
        end = (h @ self.end).masked_fill(fill, float("-inf"))
        return {"start": start, "end": end, "ner": None, "mask": mask}

    def loss(self, out, span_targets, bio=None):
        l_span = span_loss(out["start"], out["end"], span_targets)
        return l_span, l_span, torch.zeros_like(l_span)
