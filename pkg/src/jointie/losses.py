"""Cross-entropy objectives for both heads and their combination."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
import torch.nn.functional as F

from .data import LabeledExample, ValidationError

SUM = "sum"
LEARNABLE_ALPHA = "learnable_alpha"
LOSS_MODES = (SUM, LEARNABLE_ALPHA)


def span_targets(example: LabeledExample, m: int) -> list[tuple[int, int]]:
    """Sentinel-offset (start, end) target per field.

    Only the first gold span is a target; unanswered fields point at the
    sentinel (position 0).
    """
    n = len(example.document)
    targets = []
    for i in range(m):
        spans = example.spans_for(i)
        if not spans:
            targets.append((0, 0))
            continue
        s, e = spans[0]
        if not 0 <= s <= e < n:
            raise ValidationError(f"doc_id={example.document.doc_id!r}: gold span ({s},{e}) out of range")
        targets.append((s + 1, e + 1))
    return targets


def span_loss(start_logits: torch.Tensor, end_logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Mean over fields (and batch) of start CE + end CE.

    Logits are (..., m, positions); ``targets`` is (..., m, 2). Masked
    positions should carry -inf.
    """
    m_pos = start_logits.shape[-1]
    if targets.numel() and (int(targets.min()) < 0 or int(targets.max()) >= m_pos):
        raise ValidationError("span target outside scored positions")
    ls = F.cross_entropy(start_logits.reshape(-1, m_pos), targets[..., 0].reshape(-1), reduction="none")
    le = F.cross_entropy(end_logits.reshape(-1, m_pos), targets[..., 1].reshape(-1), reduction="none")
    return (ls + le).mean()


def ner_loss(logits: torch.Tensor, gold: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
    """Mean token cross-entropy of (..., n, n_e) logits against (..., n) labels."""
    if logits.shape[:-1] != gold.shape:
        raise ValidationError(f"label length mismatch: logits {tuple(logits.shape[:-1])} vs gold {tuple(gold.shape)}")
    ce = F.cross_entropy(logits.reshape(-1, logits.shape[-1]), gold.reshape(-1), reduction="none")
    if mask is None:
        return ce.mean()
    mask = mask.reshape(-1).to(ce.dtype)
    return (ce * mask).sum() / mask.sum()


class LossCombiner(nn.Module):
    """Sum of both losses, or a convex mix with a learnable weight.

    The weight is ``sigmoid(raw_alpha)`` so it stays in (0, 1); raw_alpha
    starts at logit(alpha_init).
    """

    def __init__(self, mode: str = SUM, alpha_init: float = 0.5):
        super().__init__()
        if mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}, got {mode!r}")
        if not 0.0 < alpha_init < 1.0:
            raise ValueError("alpha_init must lie in (0, 1)")
        self.mode = mode
        raw = torch.logit(torch.tensor(float(alpha_init), dtype=torch.float64))
        self.raw_alpha = nn.Parameter(raw.to(torch.get_default_dtype()), requires_grad=mode == LEARNABLE_ALPHA)

    @property
    def alpha(self) -> torch.Tensor:
        return torch.sigmoid(self.raw_alpha)

    def forward(self, l_span: torch.Tensor, l_ner: torch.Tensor) -> torch.Tensor:
        if self.mode == SUM:
            return l_span + l_ner
        a = self.alpha
        return a * l_span + (1 - a) * l_ner


def combine_losses(l_span, l_ner, mode: str = SUM, raw_alpha=None):
    """Functional form of LossCombiner."""
    if mode == SUM:
        return l_span + l_ner
    if mode != LEARNABLE_ALPHA:
        raise ValueError(f"unknown loss mode {mode!r}")
    a = torch.sigmoid(torch.as_tensor(0.0 if raw_alpha is None else raw_alpha))
    return a * l_span + (1 - a) * l_ner


@dataclass
class LossReport:
    total: float
    span: float
    ner: float
    alpha: float
