"""Field span head (query embeddings + per-field general attention) and BIO head."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .data import SpanAnnotation, bio_decode

NO_ANSWER = None


class HeadConfigError(ValueError):
    """Parameter shapes do not match the encoding they are applied to."""


class SpanHead(nn.Module):
    """Per-field start/end scoring against one shared document encoding.

    For field i the start score of position j is ``v_i . f_i(h_j)`` where
    ``f_i`` is the field's start stack (end uses a separate stack). With
    depth 1 the stack is a single ``d x c`` map and the score reduces to the
    bilinear form ``v_i^T W_i h_j``. Deeper stacks put ``c x c`` maps with a
    GELU in front of the final projection.
    """

    def __init__(self, m: int, c: int, d: int | None = None, depth: int = 1):
        super().__init__()
        d = c if d is None else d
        if not 1 <= depth <= 3:
            raise HeadConfigError("span head depth must be 1, 2 or 3")
        self.m, self.c, self.d, self.depth = m, c, d, depth
        self.V = nn.Parameter(torch.empty(m, d))
        shapes = [(m, c, c)] * (depth - 1) + [(m, d, c)]
        self.start = nn.ParameterList(nn.Parameter(torch.empty(s)) for s in shapes)
        self.end = nn.ParameterList(nn.Parameter(torch.empty(s)) for s in shapes)

    def reset_parameters(self, generator: torch.Generator):
        with torch.no_grad():
            for p in self.parameters():
                p.copy_(torch.randn(p.shape, generator=generator, dtype=p.dtype) * 0.02)

    def _scores(self, h, stack):
        if len(stack) == 1:
            # (m, c): v_i^T W_i folded first, one matmul for all fields
            query = torch.einsum("md,mdc->mc", self.V, stack[0])
            return torch.einsum("...tc,mc->...mt", h, query)
        x = torch.einsum("...tc,mkc->...mtk", h, stack[0])
        for w in stack[1:]:
            x = torch.einsum("...mtc,mkc->...mtk", torch.nn.functional.gelu(x), w)
        return torch.einsum("...mtd,md->...mt", x, self.V)

    def forward(self, h: torch.Tensor, mask: torch.Tensor | None = None):
        """Return start and end logits of shape (..., m, positions).

        ``h`` is (..., positions, c) with the sentinel row at position 0;
        masked positions get -inf.
        """
        if h.shape[-1] != self.c:
            raise HeadConfigError(f"encoding width {h.shape[-1]} != span head input {self.c}")
        start, end = self._scores(h, self.start), self._scores(h, self.end)
        if mask is not None:
            fill = ~mask[..., None, :]
            start = start.masked_fill(fill, float("-inf"))
            end = end.masked_fill(fill, float("-inf"))
        return start, end


class NerHead(nn.Module):
    """Dense layer over token vectors giving logits for the 2m+1 BIO labels."""

    def __init__(self, m: int, c: int):
        super().__init__()
        self.m, self.c, self.n_labels = m, c, 2 * m + 1
        self.W = nn.Parameter(torch.empty(c, self.n_labels))
        self.bias = nn.Parameter(torch.zeros(self.n_labels))

    def reset_parameters(self, generator: torch.Generator):
        with torch.no_grad():
            self.W.copy_(torch.randn(self.W.shape, generator=generator, dtype=self.W.dtype) * 0.02)
            self.bias.zero_()

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        if h.shape[-1] != self.c:
            raise HeadConfigError(f"encoding width {h.shape[-1]} != NER head input {self.c}")
        return h @ self.W + self.bias


# -- functional views ----------------------------------------------------------

@dataclass
class FieldSpan:
    start_probs: np.ndarray
    end_probs: np.ndarray
    start_argmax: int
    end_argmax: int
    span: tuple[int, int] | None


@dataclass
class SpanPrediction:
    fields: list[FieldSpan]

    def spans(self) -> list[tuple[int, int] | None]:
        return [f.span for f in self.fields]


def span_scores(encoded: torch.Tensor, head: SpanHead):
    """Per-field start/end distributions over the n+1 rows of ``encoded``."""
    with torch.no_grad():
        start, end = head(encoded)
    return torch.softmax(start, dim=-1), torch.softmax(end, dim=-1)


def resolve_span(start_probs, end_probs):
    """Independent argmax of start and end; sentinel or inverted pair means no answer.

    Returns document coordinates (sentinel offset removed) or ``NO_ANSWER``.
    Ties go to the earliest position.
    """
    s = int(np.argmax(np.asarray(start_probs)))
    e = int(np.argmax(np.asarray(end_probs)))
    if s == 0 or e == 0 or s > e:
        return NO_ANSWER
    return (s - 1, e - 1)


def span_prediction(start_probs: np.ndarray, end_probs: np.ndarray) -> SpanPrediction:
    """Build a SpanPrediction from (m, n+1) probability arrays."""
    fields = []
    for ps, pe in zip(start_probs, end_probs):
        fields.append(FieldSpan(ps, pe, int(np.argmax(ps)), int(np.argmax(pe)), resolve_span(ps, pe)))
    return SpanPrediction(fields)


@dataclass
class TokenLabelDistribution:
    probs: np.ndarray
    argmax_labels: list[int]


def ner_scores(encoded: torch.Tensor, head: NerHead) -> TokenLabelDistribution:
    """Softmax over labels for every token row (sentinel row excluded by caller)."""
    with torch.no_grad():
        probs = torch.softmax(head(encoded), dim=-1).cpu().numpy()
    return TokenLabelDistribution(probs, [int(k) for k in probs.argmax(axis=-1)])


def ner_predict(dist: TokenLabelDistribution | Sequence[int], m: int) -> list[SpanAnnotation]:
    labels = dist.argmax_labels if isinstance(dist, TokenLabelDistribution) else dist
    return bio_decode(labels, m)
