"""Extraction metrics: first-span token F1, exact-match entity F1, multi-span recall."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

from .aggregation import AggregatedExtraction
from .data import FieldSchema, LabeledExample


class DocumentMismatchError(ValueError):
    pass


def _pair(predictions: Sequence[AggregatedExtraction], gold: Sequence[LabeledExample]):
    if len(predictions) != len(gold):
        raise DocumentMismatchError(f"{len(predictions)} predictions for {len(gold)} gold documents")
    by_id = {p.doc_id: p for p in predictions}
    pairs = []
    for ex in gold:
        doc_id = ex.document.doc_id
        if doc_id not in by_id:
            raise DocumentMismatchError(f"no prediction for doc_id {doc_id!r}")
        pairs.append((by_id[doc_id], ex))
    return pairs


def span_f1(pred, gold) -> float:
    """Token-overlap F1 between two inclusive spans."""
    overlap = min(pred[1], gold[1]) - max(pred[0], gold[0]) + 1
    if overlap <= 0:
        return 0.0
    p = overlap / (pred[1] - pred[0] + 1)
    r = overlap / (gold[1] - gold[0] + 1)
    return 2 * p * r / (p + r)


def squad_f1(predictions, gold, m: int | None = None) -> float:
    """Mean over (document, field) of the first predicted span's best token F1.

    No prediction against no gold scores 1, a one-sided miss scores 0.
    """
    scores = []
    for pred, ex in _pair(predictions, gold):
        fields = range(len(pred.fields) if m is None else m)
        for i in fields:
            first = pred.first_span(i)
            golds = ex.spans_for(i)
            if first is None or not golds:
                scores.append(1.0 if first is None and not golds else 0.0)
            else:
                scores.append(max(span_f1(first, g) for g in golds))
    return sum(scores) / len(scores) if scores else 0.0


def _prf(tp, fp, fn):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * tp / (2 * tp + fp + fn) if tp + fp + fn else 0.0
    return p, r, f


@dataclass
class ConllScores:
    per_field: dict[str, float]
    micro: float
    counts: dict[str, tuple[int, int, int]]


def conll_f1(predictions, gold, schema: FieldSchema) -> ConllScores:
    """Exact-boundary, exact-field entity matching, micro-averaged over fields."""
    tp = [0] * schema.m
    fp = [0] * schema.m
    fn = [0] * schema.m
    for pred, ex in _pair(predictions, gold):
        for i in range(schema.m):
            p = set(pred.spans(i))
            g = set(ex.spans_for(i))
            tp[i] += len(p & g)
            fp[i] += len(p - g)
            fn[i] += len(g - p)
    per_field = {f.name: _prf(tp[i], fp[i], fn[i])[2] for i, f in enumerate(schema.fields)}
    micro = _prf(sum(tp), sum(fp), sum(fn))[2]
    counts = {f.name: (tp[i], fp[i], fn[i]) for i, f in enumerate(schema.fields)}
    return ConllScores(per_field, micro, counts)


def multispan_recall(predictions, gold, m: int, all_fields: bool = False) -> float | None:
    """Share of gold spans recovered exactly, over fields with two or more gold spans.

    ``all_fields=True`` counts every annotated field instead. Returns None
    when no field qualifies.
    """
    found = total = 0
    for pred, ex in _pair(predictions, gold):
        for i in range(m):
            golds = ex.spans_for(i)
            if len(golds) < (1 if all_fields else 2):
                continue
            predicted = set(pred.spans(i))
            found += sum(1 for g in golds if g in predicted)
            total += len(golds)
    return found / total if total else None


@dataclass
class MetricReport:
    squad_f1: float
    conll_f1: dict[str, float]
    conll_micro_f1: float
    multispan_recall: float | None
    support: dict[str, int] = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def table(self) -> str:
        width = max([len(k) for k in self.conll_f1] + [12])
        lines = [f"{'field':<{width}}  {'conll_f1':>8}  {'support':>7}"]
        for name, f1 in self.conll_f1.items():
            lines.append(f"{name:<{width}}  {f1:8.4f}  {self.support.get(name, 0):7d}")
        lines.append(f"{'micro':<{width}}  {self.conll_micro_f1:8.4f}")
        lines.append(f"squad_f1 (first span): {self.squad_f1:.4f}")
        ms = "n/a" if self.multispan_recall is None else f"{self.multispan_recall:.4f}"
        lines.append(f"multi-span recall:     {ms}")
        return "\n".join(lines)


def evaluate(predictions, gold, schema: FieldSchema, all_fields_recall: bool = False) -> MetricReport:
    conll = conll_f1(predictions, gold, schema)
    support = {f.name: sum(len(ex.spans_for(i)) for ex in gold) for i, f in enumerate(schema.fields)}
    return MetricReport(
        squad_f1=squad_f1(predictions, gold, schema.m),
        conll_f1=conll.per_field,
        conll_micro_f1=conll.micro,
        multispan_recall=multispan_recall(predictions, gold, schema.m, all_fields_recall),
        support=support,
    )
