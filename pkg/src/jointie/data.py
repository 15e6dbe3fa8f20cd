"""Core domain types, dataset ingestion and BIO conversion.

Token indices are 0-based and span ends are inclusive everywhere.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

Span = tuple[int, int]

OUTSIDE = 0


class DatasetFormatError(ValueError):
    """The dataset file could not be parsed."""


class ValidationError(ValueError):
    """A record violates a Document or SpanAnnotation invariant."""


class EncodingConflictError(ValueError):
    """Spans of different fields overlap and cannot share one BIO sequence."""

    def __init__(self, collisions):
        self.collisions = collisions
        listed = ", ".join(f"field {a}{sa} / field {b}{sb}" for a, sa, b, sb in collisions)
        super().__init__(f"overlapping spans across fields: {listed}")


@dataclass(frozen=True)
class Document:
    doc_id: str
    tokens: tuple[str, ...]
    raw_text: str | None = None
    offsets: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValidationError(f"document {self.doc_id!r} has no tokens")
        for j, tok in enumerate(self.tokens):
            if not tok:
                raise ValidationError(f"document {self.doc_id!r}: empty token at index {j}")
        if self.offsets is not None:
            offsets = tuple((int(a), int(b)) for a, b in self.offsets)
            if len(offsets) != len(self.tokens):
                raise ValidationError(f"document {self.doc_id!r}: offsets/tokens length mismatch")
            prev_end = 0
            for a, b in offsets:
                if a < prev_end or b < a:
                    raise ValidationError(
                        f"document {self.doc_id!r}: offsets overlap or are not increasing")
                prev_end = b
            object.__setattr__(self, "offsets", offsets)

    def __len__(self):
        return len(self.tokens)

    def text(self, span: Span) -> str:
        start, end = span
        if self.raw_text is not None and self.offsets is not None:
            return self.raw_text[self.offsets[start][0]:self.offsets[end][1]]
        return " ".join(self.tokens[start:end + 1])


@dataclass(frozen=True)
class FieldDef:
    index: int
    name: str
    name_tokens: tuple[str, ...]


@dataclass(frozen=True)
class FieldSchema:
    fields: tuple[FieldDef, ...]

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))
        if not self.fields:
            raise ValidationError("schema needs at least one field")
        names = [f.name for f in self.fields]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate field names in schema: {names}")
        for i, f in enumerate(self.fields):
            if f.index != i:
                raise ValidationError(f"field {f.name!r} has index {f.index}, expected {i}")

    @classmethod
    def from_names(cls, names: Iterable[str]) -> FieldSchema:
        return cls(tuple(FieldDef(i, name, tuple(tokenize(name.replace("_", " "))))
                         for i, name in enumerate(names)))

    @property
    def m(self) -> int:
        return len(self.fields)

    @property
    def n_labels(self) -> int:
        return 2 * self.m + 1

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.fields]

    def index_of(self, name: str) -> int:
        for f in self.fields:
            if f.name == name:
                return f.index
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"fields": [{"name": f.name} for f in self.fields]}


@dataclass(frozen=True)
class SpanAnnotation:
    field_index: int
    spans: tuple[Span, ...]

    def __post_init__(self):
        spans = tuple((int(s), int(e)) for s, e in self.spans)
        object.__setattr__(self, "spans", spans)
        for s, e in spans:
            if s > e or s < 0:
                raise ValidationError(f"field {self.field_index}: malformed span ({s},{e})")
        for (_, e0), (s1, _) in zip(spans, spans[1:]):
            if s1 <= e0:
                raise ValidationError(
                    f"field {self.field_index}: spans must be sorted and non-overlapping")


@dataclass(frozen=True)
class LabeledExample:
    document: Document
    annotations: tuple[SpanAnnotation, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "annotations", tuple(self.annotations))
        seen = set()
        n = len(self.document)
        for ann in self.annotations:
            if ann.field_index in seen:
                raise ValidationError(
                    f"document {self.document.doc_id!r}: field {ann.field_index} annotated twice")
            seen.add(ann.field_index)
            for s, e in ann.spans:
                if e >= n:
                    raise ValidationError(
                        f"document {self.document.doc_id!r}, field {ann.field_index}: "
                        f"span ({s},{e}) outside {n} tokens")

    def spans_for(self, field_index: int) -> tuple[Span, ...]:
        for ann in self.annotations:
            if ann.field_index == field_index:
                return ann.spans
        return ()


_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Whitespace + punctuation tokenizer for raw text."""
    return _TOKEN_RE.findall(text)


def tokenize_with_offsets(text: str) -> tuple[list[str], list[tuple[int, int]]]:
    matches = list(_TOKEN_RE.finditer(text))
    return [m.group() for m in matches], [(m.start(), m.end()) for m in matches]


# -- BIO ---------------------------------------------------------------------

def begin_label(field_index: int) -> int:
    return 2 * field_index + 1


def inside_label(field_index: int) -> int:
    return 2 * field_index + 2


def label_name(label: int, schema: FieldSchema | None = None) -> str:
    if label == OUTSIDE:
        return "O"
    i, rem = divmod(label - 1, 2)
    name = schema.fields[i].name if schema is not None else str(i)
    return ("B-" if rem == 0 else "I-") + name


def bio_encode(annotations: Sequence[SpanAnnotation], n: int, m: int) -> list[int]:
    """Write each span as B at its start and I on the remaining tokens."""
    owner: list[tuple[int, Span] | None] = [None] * n
    labels = [OUTSIDE] * n
    collisions = []
    for ann in annotations:
        if not 0 <= ann.field_index < m:
            raise ValidationError(f"field index {ann.field_index} outside schema of {m}")
        for s, e in ann.spans:
            if e >= n:
                raise ValidationError(f"span ({s},{e}) outside {n} tokens")
            clash = next((owner[t] for t in range(s, e + 1) if owner[t] is not None), None)
            if clash is not None:
                collisions.append((clash[0], clash[1], ann.field_index, (s, e)))
                continue
            for t in range(s, e + 1):
                owner[t] = (ann.field_index, (s, e))
                labels[t] = inside_label(ann.field_index)
            labels[s] = begin_label(ann.field_index)
    if collisions:
        raise EncodingConflictError(collisions)
    return labels


def bio_decode(labels: Sequence[int], m: int) -> list[SpanAnnotation]:
    """Decode BIO labels into spans.

    An I label that does not continue an entity of the same field opens a
    new entity, and a change of field always closes the running one.
    """
    found: dict[int, list[Span]] = {}
    current = None  # (field, start)
    for t, lab in enumerate(labels):
        lab = int(lab)
        if lab == OUTSIDE:
            if current is not None:
                found.setdefault(current[0], []).append((current[1], t - 1))
                current = None
            continue
        fi, rem = divmod(lab - 1, 2)
        if not 0 <= fi < m:
            raise ValueError(f"label {lab} outside {2 * m + 1} BIO labels")
        is_begin = rem == 0
        if current is not None and (is_begin or current[0] != fi):
            found.setdefault(current[0], []).append((current[1], t - 1))
            current = None
        if current is None:
            current = (fi, t)
    if current is not None:
        found.setdefault(current[0], []).append((current[1], len(labels) - 1))
    return [SpanAnnotation(fi, tuple(found[fi])) for fi in sorted(found)]


# -- dataset files -------------------------------------------------------------

def parse_schema(obj) -> FieldSchema:
    try:
        names = [f["name"] for f in obj["fields"]]
    except (KeyError, TypeError) as exc:
        raise DatasetFormatError(f"malformed schema block: {exc!r}") from None
    return FieldSchema.from_names(names)


def _parse_example(rec, schema: FieldSchema, k: int) -> LabeledExample:
    ctx = f"example #{k}"
    if not isinstance(rec, dict):
        raise DatasetFormatError(f"{ctx}: expected an object")
    try:
        doc_id = str(rec["doc_id"])
        tokens = rec["tokens"]
    except KeyError as exc:
        raise DatasetFormatError(f"{ctx}: missing key {exc}") from None
    ctx = f"example #{k} (doc_id={doc_id!r})"
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise DatasetFormatError(f"{ctx}: 'tokens' must be a list of strings")
    doc = Document(doc_id, tuple(tokens), rec.get("raw_text"),
                   tuple(map(tuple, rec["offsets"])) if rec.get("offsets") else None)
    annotations = []
    for ann in rec.get("annotations", []):
        try:
            name = ann["field"]
            spans = [tuple(s) for s in ann["spans"]]
        except (KeyError, TypeError):
            raise DatasetFormatError(f"{ctx}: malformed annotation {ann!r}") from None
        try:
            fi = schema.index_of(name)
        except KeyError:
            raise ValidationError(f"{ctx}: unknown field {name!r}") from None
        for span in spans:
            if len(span) != 2 or not all(isinstance(v, int) for v in span):
                raise DatasetFormatError(f"{ctx}, field {name!r}: span {list(span)} is not [start, end]")
            s, e = span
            if not 0 <= s <= e < len(doc):
                raise ValidationError(
                    f"doc_id={doc_id!r}, field {name!r}: span ({s},{e}) out of range "
                    f"for {len(doc)} tokens")
        try:
            annotations.append(SpanAnnotation(fi, tuple(sorted(spans))))
        except ValidationError as exc:
            raise ValidationError(f"doc_id={doc_id!r}, field {name!r}: {exc}") from None
    return LabeledExample(doc, tuple(annotations))


def read_dataset(path) -> tuple[FieldSchema, list[LabeledExample]]:
    """Parse a dataset file, taking the schema from the file itself."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(obj, dict) or "schema" not in obj or "examples" not in obj:
        raise DatasetFormatError(f"{path}: top level must hold 'schema' and 'examples'")
    schema = parse_schema(obj["schema"])
    examples = [_parse_example(rec, schema, k) for k, rec in enumerate(obj["examples"])]
    return schema, examples


def load_dataset(path, schema: FieldSchema | None = None) -> list[LabeledExample]:
    """Load and validate examples, checking the file schema against ``schema``."""
    file_schema, examples = read_dataset(path)
    if schema is not None and file_schema.names != schema.names:
        raise ValidationError(
            f"{path}: schema fields {file_schema.names} do not match expected {schema.names}")
    return examples


def check_ner_targets(examples: Sequence[LabeledExample], m: int) -> None:
    """Reject examples whose spans collide across fields (not representable in BIO)."""
    for ex in examples:
        try:
            bio_encode(ex.annotations, len(ex.document), m)
        except EncodingConflictError as exc:
            raise ValidationError(f"doc_id={ex.document.doc_id!r}: {exc}") from None


def dataset_to_json(schema: FieldSchema, examples: Sequence[LabeledExample]) -> dict:
    recs = []
    for ex in examples:
        rec = {"doc_id": ex.document.doc_id, "tokens": list(ex.document.tokens),
               "annotations": [{"field": schema.fields[a.field_index].name,
                                "spans": [list(s) for s in a.spans]}
                               for a in sorted(ex.annotations, key=lambda a: a.field_index)]}
        recs.append(rec)
    return {"schema": schema.to_json(), "examples": recs}


def write_dataset(path, schema: FieldSchema, examples: Sequence[LabeledExample]) -> None:
    Path(path).write_text(json.dumps(dataset_to_json(schema, examples), ensure_ascii=False),
                          encoding="utf-8")
