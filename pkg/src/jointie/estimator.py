"""Scikit-learn style estimators wrapping the joint and pairwise networks."""

from __future__ import annotations

import logging
import math
import time
from typing import Callable, Sequence

import numpy as np
import torch
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .aggregation import AggregatedExtraction, aggregate
from .data import Document, FieldSchema, LabeledExample, bio_encode
from .encoder import ToyTransformerConfig, Vocabulary, build_vocab
from .heads import SpanPrediction, TokenLabelDistribution, ner_predict, span_prediction
from .losses import LEARNABLE_ALPHA, LossReport, span_targets
from .metrics import conll_f1, squad_f1
from .model import DocInput, JointNetwork, PairwiseNetwork, featurize
from .validation import check_documents, check_examples, check_schema

logger = logging.getLogger(__name__)

SEP = "[SEP]"
_DTYPES = {"float32": torch.float32, "float64": torch.float64}


class TrainingError(RuntimeError):
    """Optimization produced a non-finite loss."""


class _Extractor(BaseEstimator):
    """Shared training and inference loop.

    Subclasses provide ``_make_vocab`` and ``_make_network``.
    """

    def __init__(self, schema: FieldSchema | None = None, *, window_length=384, stride=128,
                 embed_dim=64, num_layers=2, num_heads=4, feedforward_dim=128, dropout=0.1,
                 epochs=20, batch_size=16, learning_rate=5e-5, betas=(0.9, 0.999), eps=1e-8,
                 min_count=1, seed=0, dtype="float32"):
        self.schema = schema
        self.window_length = window_length
        self.stride = stride
        self.embed_dim = embed_dim
        self.num_layers = num_layers
        self.num_heads = num_heads
        self.feedforward_dim = feedforward_dim
        self.dropout = dropout
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.betas = betas
        self.eps = eps
        self.min_count = min_count
        self.seed = seed
        self.dtype = dtype

    # -- construction -----------------------------------------------------

    def _check_params(self):
        check_schema(self.schema)
        if self.learning_rate < 0 or not math.isfinite(self.learning_rate):
            raise ValueError("learning_rate must be finite and >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 1 <= self.stride <= self.window_length:
            raise ValueError("need 1 <= stride <= window_length")
        if self.dtype not in _DTYPES:
            raise ValueError(f"dtype must be one of {sorted(_DTYPES)}")

    def _encoder_config(self, vocab_size, max_position):
        return ToyTransformerConfig(
            vocab_size=vocab_size, embed_dim=self.embed_dim, num_layers=self.num_layers,
            num_heads=self.num_heads, feedforward_dim=self.feedforward_dim,
            max_position=max_position, dropout=self.dropout, parameter_init_seed=self.seed)

    def _initialize(self, vocab: Vocabulary):
        self.schema_ = self.schema
        self.vocab_ = vocab
        self.network_ = self._make_network().to(_DTYPES[self.dtype])
        return self

    def _featurize(self, doc: Document) -> DocInput:
        return featurize(doc.tokens, self.vocab_, self.window_length, self.stride)

    # -- training -------------------------------------------------------------

    def _targets(self, ex: LabeledExample):
        m = self.schema.m
        spans = torch.tensor(span_targets(ex, m), dtype=torch.long)
        bio = torch.tensor(bio_encode(ex.annotations, len(ex.document), m), dtype=torch.long) \
            if self._needs_bio else None
        return spans, bio

    @property
    def _needs_bio(self):
        return False

    def batch_loss(self, feats: Sequence[DocInput], targets):
        """Joint loss of one mini-batch and its components."""
        out = self.network_(feats)
        spans = torch.stack([t[0] for t in targets])
        bio = None
        if self._needs_bio:
            width = out["ner"].shape[1]
            bio = torch.zeros((len(targets), width), dtype=torch.long)
            for r, (_, b) in enumerate(targets):
                bio[r, :len(b)] = b
        return self.network_.loss(out, spans, bio)

    def fit(self, X: Sequence[LabeledExample], y=None, *, dev: Sequence[LabeledExample] | None = None,
            callback: Callable[[dict, "_Extractor"], None] | None = None):
        """Train on labeled examples.

        ``callback(record, self)`` runs after every epoch with the metrics
        record that the training log stores.
        """
        self._check_params()
        X = check_examples(X, self.schema, ner_targets=self._needs_bio)
        if not X:
            raise ValueError("cannot fit on an empty training set")
        torch.manual_seed(self.seed)
        rng = np.random.default_rng(self.seed)
        self._initialize(self._make_vocab([ex.document for ex in X]))
        net = self.network_
        params = [p for p in net.parameters() if p.requires_grad]
        optimizer = torch.optim.Adam(params, lr=self.learning_rate, betas=tuple(self.betas), eps=self.eps)
        feats = [self._featurize(ex.document) for ex in X]
        targets = [self._targets(ex) for ex in X]
        self.history_ = []
        self.step_losses_ = []
        for epoch in range(1, self.epochs + 1):
            net.train()
            tic = time.perf_counter()
            order = rng.permutation(len(X))
            sums = np.zeros(3)
            alphas = []
            for b, lo in enumerate(range(0, len(X), self.batch_size)):
                idx = order[lo:lo + self.batch_size]
                total, l_span, l_ner = self.batch_loss([feats[i] for i in idx], [targets[i] for i in idx])
                if not torch.isfinite(total):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch}, batch {b}: total={total.item()}, "
                        f"span={l_span.item()}, ner={l_ner.item()}")
                optimizer.zero_grad()
                total.backward()
                optimizer.step()
                vals = (total.item(), l_span.item(), l_ner.item())
                self.step_losses_.append(vals[0])
                sums += np.array(vals) * len(idx)
                alphas.append(self.alpha_)
            seconds = time.perf_counter() - tic
            mean = sums / len(X)
            record = {"epoch": epoch, "L": float(mean[0]), "L_span": float(mean[1]), "L_NER": float(mean[2]),
                      "alpha": alphas[-1], "alpha_min": min(alphas), "alpha_max": max(alphas),
                      "dev_squad_f1": None, "dev_conll_f1": None, "epoch_seconds": seconds}
            if dev:
                preds = self.predict(dev)
                record["dev_squad_f1"] = squad_f1(preds, dev, self.schema.m)
                record["dev_conll_f1"] = conll_f1(preds, dev, self.schema).micro
            logger.info("epoch %d: L=%.4f span=%.4f ner=%.4f (%.1fs)", epoch, *mean, seconds)
            self.history_.append(record)
            if callback is not None:
                callback(record, self)
        return self

    def initialize(self, X):
        """Build the vocabulary and an untrained network from documents in ``X``."""
        self._check_params()
        torch.manual_seed(self.seed)
        return self._initialize(self._make_vocab(check_documents(X)))

    @property
    def alpha_(self) -> float:
        combiner = getattr(self.network_, "combiner", None)
        if combiner is None or combiner.mode != LEARNABLE_ALPHA:
            return 0.5
        return combiner.alpha.item()

    def loss_report(self, X: Sequence[LabeledExample]) -> LossReport:
        """Loss of the current parameters on ``X`` (dropout off, one batch)."""
        check_is_fitted(self, "network_")
        X = check_examples(X, self.schema, ner_targets=self._needs_bio)
        self.network_.eval()
        with torch.no_grad():
            total, l_span, l_ner = self.batch_loss([self._featurize(ex.document) for ex in X],
                                                  [self._targets(ex) for ex in X])
        return LossReport(float(total), float(l_span), float(l_ner), self.alpha_)

    # -- inference ---------------------------------------------------------

    @property
    def encoder_calls_(self) -> int:
        """Sequences pushed through the encoder so far (training included)."""
        check_is_fitted(self, "network_")
        return self.network_.encoder.sequences_encoded

    def predict_raw(self, X) -> list[tuple[SpanPrediction, TokenLabelDistribution | None]]:
        check_is_fitted(self, "network_")
        docs = check_documents(X)
        net = self.network_
        net.eval()
        results = []
        with torch.no_grad():
            for lo in range(0, len(docs), self.batch_size):
                chunk = docs[lo:lo + self.batch_size]
                out = net([self._featurize(d) for d in chunk])
                p_start = torch.softmax(out["start"], dim=-1).cpu().numpy()
                p_end = torch.softmax(out["end"], dim=-1).cpu().numpy()
                p_ner = torch.softmax(out["ner"], dim=-1).cpu().numpy() if out["ner"] is not None else None
                for r, d in enumerate(chunk):
                    n = len(d)
                    sp = span_prediction(p_start[r, :, :n + 1], p_end[r, :, :n + 1])
                    dist = None
                    if p_ner is not None:
                        probs = p_ner[r, :n]
                        dist = TokenLabelDistribution(probs, [int(k) for k in probs.argmax(axis=-1)])
                    results.append((sp, dist))
        return results

    def predict(self, X) -> list[AggregatedExtraction]:
        """Aggregated extraction per document."""
        docs = check_documents(X)
        out = []
        for d, (sp, dist) in zip(docs, self.predict_raw(docs)):
            ner = ner_predict(dist, self.schema.m) if dist is not None else []
            out.append(aggregate(sp, ner, d.doc_id))
        return out

    def predict_span_head(self, X) -> list[AggregatedExtraction]:
        """Span head answers alone, without the BIO spans."""
        docs = check_documents(X)
        return [aggregate(sp, [], d.doc_id) for d, (sp, _) in zip(docs, self.predict_raw(docs))]

    def score(self, X, y=None) -> float:
        """First-span token F1 on labeled examples."""
        X = check_examples(X, self.schema)
        return squad_f1(self.predict(X), X, self.schema.m)


class JointExtractor(_Extractor):
    """Shared document encoding feeding a per-field span head and a BIO head.

    Parameters mirror the training setup: ``window_length``/``stride``
    control windowing, ``embed_dim`` etc. size the encoder, ``span_depth``
    is the number of linear maps in each field's start/end stack, and
    ``loss_mode`` is ``"sum"`` or ``"learnable_alpha"``. ``use_ner=False``
    gives the span-head-only variant.
    """

    def __init__(self, schema: FieldSchema | None = None, *, window_length=384, stride=128,
                 embed_dim=64, num_layers=2, num_heads=4, feedforward_dim=128, dropout=0.1,
                 span_depth=1, use_ner=True, epochs=20, batch_size=16, learning_rate=5e-5,
                 betas=(0.9, 0.999), eps=1e-8, loss_mode="sum", alpha_init=0.5, min_count=1,
                 seed=0, dtype="float32"):
        super().__init__(schema, window_length=window_length, stride=stride, embed_dim=embed_dim,
                         num_layers=num_layers, num_heads=num_heads, feedforward_dim=feedforward_dim,
                         dropout=dropout, epochs=epochs, batch_size=batch_size,
                         learning_rate=learning_rate, betas=betas, eps=eps, min_count=min_count,
                         seed=seed, dtype=dtype)
        self.span_depth = span_depth
        self.use_ner = use_ner
        self.loss_mode = loss_mode
        self.alpha_init = alpha_init

    @property
    def _needs_bio(self):
        return self.use_ner

    def _make_vocab(self, docs):
        return build_vocab(docs, self.min_count)

    def _make_network(self):
        cfg = self._encoder_config(len(self.vocab_), self.window_length)
        return JointNetwork(cfg, self.schema.m, self.span_depth, self.loss_mode, self.alpha_init,
                            use_ner=self.use_ner)


class PairwiseExtractor(_Extractor):
    """Baseline encoding each (field name, document window) pair separately.

    Windows follow the same plan as the joint model; the field prefix is
    added on top, so the encoder accepts ``window_length`` plus the longest
    prefix.
    """

    def _make_vocab(self, docs):
        base = build_vocab(docs, self.min_count)
        return base.extended([SEP] + [t for f in self.schema.fields for t in f.name_tokens])

    def _prefixes(self):
        sep = self.vocab_.stoi[SEP]
        return [self.vocab_.encode(f.name_tokens) + [sep] for f in self.schema.fields]

    def _make_network(self):
        prefixes = self._prefixes()
        cfg = self._encoder_config(len(self.vocab_), self.window_length + max(map(len, prefixes)))
        return PairwiseNetwork(cfg, prefixes)
