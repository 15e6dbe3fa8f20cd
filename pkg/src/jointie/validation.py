"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

from typing import Iterable

from .data import Document, FieldSchema, LabeledExample, ValidationError, check_ner_targets


def check_schema(schema) -> FieldSchema:
    if not isinstance(schema, FieldSchema):
        raise ValueError(f"schema must be a FieldSchema, got {type(schema).__name__}")
    return schema


def check_examples(X: Iterable, schema: FieldSchema, ner_targets: bool = False) -> list[LabeledExample]:
    """Validate labeled examples against ``schema``.

    With ``ner_targets`` the spans must also be representable as one BIO
    sequence (no cross-field overlap).
    """
    X = list(X)
    for ex in X:
        if not isinstance(ex, LabeledExample):
            raise ValueError(f"expected LabeledExample, got {type(ex).__name__}")
        for ann in ex.annotations:
            if not 0 <= ann.field_index < schema.m:
                raise ValidationError(
                    f"doc_id={ex.document.doc_id!r}: field index {ann.field_index} not in schema of {schema.m}")
    if ner_targets:
        check_ner_targets(X, schema.m)
    return X


def check_documents(X: Iterable) -> list[Document]:
    """Accept Documents or LabeledExamples; return Documents."""
    docs = []
    for item in X:
        if isinstance(item, LabeledExample):
            docs.append(item.document)
        elif isinstance(item, Document):
            docs.append(item)
        else:
            raise ValueError(f"expected Document or LabeledExample, got {type(item).__name__}")
    return docs
