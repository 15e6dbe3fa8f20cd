"""Span-priority merge of span head and BIO head outputs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .data import Document, FieldSchema, SpanAnnotation

SPAN_HEAD = "span"
NER_HEAD = "ner"


@dataclass(frozen=True)
class ExtractedSpan:
    start: int
    end: int
    source: str

    @property
    def bounds(self):
        return (self.start, self.end)


@dataclass(frozen=True)
class AggregatedExtraction:
    doc_id: str
    fields: tuple[tuple[ExtractedSpan, ...], ...]

    def spans(self, field_index: int) -> list[tuple[int, int]]:
        return [s.bounds for s in self.fields[field_index]]

    def first_span(self, field_index: int):
        spans = self.fields[field_index]
        return spans[0].bounds if spans else None


def overlaps(a, b) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def _order(span: ExtractedSpan):
    return (span.start, 0 if span.source == SPAN_HEAD else 1, span.end)


def aggregate(span_pred: Sequence, ner_spans: Sequence[SpanAnnotation], doc_id: str = "") -> AggregatedExtraction:
    """Keep each field's span-head answer and every same-field NER span that does not touch it.

    ``span_pred`` is a SpanPrediction or a per-field list of resolved spans
    (``None`` for no answer). Spans of different fields never suppress each
    other.
    """
    resolved = span_pred.spans() if hasattr(span_pred, "spans") else list(span_pred)
    by_field: dict[int, list] = {}
    for ann in ner_spans:
        by_field.setdefault(ann.field_index, []).extend(ann.spans)
    out = []
    for i, best in enumerate(resolved):
        kept = []
        if best is not None:
            kept.append(ExtractedSpan(best[0], best[1], SPAN_HEAD))
        for s in by_field.get(i, ()):
            if best is None or not overlaps(s, best):
                kept.append(ExtractedSpan(s[0], s[1], NER_HEAD))
        out.append(tuple(sorted(kept, key=_order)))
    return AggregatedExtraction(doc_id, tuple(out))


def prediction_record(extraction: AggregatedExtraction, schema: FieldSchema, doc: Document) -> dict:
    """JSON record for the prediction file."""
    return {
        "doc_id": extraction.doc_id,
        "fields": {
            schema.fields[i].name: [
                {"start": s.start, "end": s.end, "source": s.source, "text": doc.text(s.bounds)}
                for s in spans]
            for i, spans in enumerate(extraction.fields)
        },
    }


def from_record(rec: dict, schema: FieldSchema) -> AggregatedExtraction:
    fields = []
    for f in schema.fields:
        items = rec.get("fields", {}).get(f.name, [])
        fields.append(tuple(sorted((ExtractedSpan(int(x["start"]), int(x["end"]), x.get("source", NER_HEAD))
                                    for x in items), key=_order)))
    return AggregatedExtraction(str(rec["doc_id"]), tuple(fields))
