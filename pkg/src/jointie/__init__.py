"""Joint span extraction and BIO sequence labeling for long business documents."""

from .aggregation import AggregatedExtraction, aggregate
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (Document, FieldDef, FieldSchema, LabeledExample, SpanAnnotation, bio_decode,
                   bio_encode, load_dataset, read_dataset, tokenize, write_dataset)
from .estimator import JointExtractor, PairwiseExtractor
from .metrics import conll_f1, evaluate, multispan_recall, squad_f1
from .synthetic import generate_synthetic_corpus
from .windowing import encode_with_averaging, plan_windows

__all__ = [
    "AggregatedExtraction", "Document", "FieldDef", "FieldSchema", "JointExtractor", "LabeledExample",
    "PairwiseExtractor", "SpanAnnotation", "aggregate", "bio_decode", "bio_encode", "conll_f1",
    "encode_with_averaging", "evaluate", "generate_synthetic_corpus", "load_checkpoint", "load_dataset",
    "multispan_recall", "plan_windows", "read_dataset", "save_checkpoint", "squad_f1", "tokenize",
    "write_dataset",
]

__version__ = "0.1.0"
