"""Training runs: configuration, metrics log and checkpoint files."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from .checkpoint import save_checkpoint
from .data import FieldSchema, LabeledExample
from .estimator import JointExtractor, PairwiseExtractor
from .losses import LOSS_MODES


@dataclass
class EncoderSettings:
    embed_dim: int = 64
    num_layers: int = 2
    num_heads: int = 4
    feedforward_dim: int = 128
    dropout: float = 0.1


@dataclass
class TrainingConfig:
    """Defaults follow the reference operating point (384/128 windows, Adam, lr 5e-5, batch 16, 20 epochs)."""

    model: str = "joint"
    epochs: int = 20
    batch_size: int = 16
    learning_rate: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    loss_mode: str = "sum"
    alpha_init: float = 0.5
    seed: int = 0
    window_length: int = 384
    stride: int = 128
    span_depth: int = 1
    min_count: int = 1
    dtype: str = "float32"
    encoder: EncoderSettings = field(default_factory=EncoderSettings)

    def __post_init__(self):
        if isinstance(self.encoder, dict):
            self.encoder = EncoderSettings(**self.encoder)
        if self.model not in ("joint", "pairwise"):
            raise ValueError(f"model must be 'joint' or 'pairwise', got {self.model!r}")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if self.loss_mode not in LOSS_MODES:
            raise ValueError(f"loss_mode must be one of {LOSS_MODES}")
        if not 1 <= self.stride <= self.window_length:
            raise ValueError("need 1 <= stride <= window_length")

    def to_dict(self):
        return asdict(self)

    def estimator(self, schema: FieldSchema):
        common = dict(window_length=self.window_length, stride=self.stride,
                      epochs=self.epochs, batch_size=self.batch_size, learning_rate=self.learning_rate,
                      betas=(self.beta1, self.beta2), eps=self.adam_eps, min_count=self.min_count,
                      seed=self.seed, dtype=self.dtype, **asdict(self.encoder))
        if self.model == "pairwise":
            return PairwiseExtractor(schema, **common)
        return JointExtractor(schema, span_depth=self.span_depth, loss_mode=self.loss_mode,
                              alpha_init=self.alpha_init, **common)


def train(config: TrainingConfig, schema: FieldSchema, train_set: Sequence[LabeledExample],
          dev_set: Sequence[LabeledExample] | None, out_dir) -> dict:
    """Fit a model, writing ``metrics.jsonl``, ``final.npz`` and ``best.npz`` to ``out_dir``.

    ``best.npz`` tracks the highest dev first-span F1 (the final epoch when
    there is no dev set). Returns the output paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"metrics": out / "metrics.jsonl", "final": out / "final.npz", "best": out / "best.npz"}
    paths["metrics"].write_text("")
    best = {"score": None}

    def on_epoch(record, est):
        with paths["metrics"].open("a") as fh:
            fh.write(json.dumps({k: record[k] for k in (
                "epoch", "L", "L_span", "L_NER", "alpha", "dev_squad_f1", "dev_conll_f1",
                "epoch_seconds")}) + "\n")
        score = record["dev_squad_f1"] if record["dev_squad_f1"] is not None else record["epoch"]
        if best["score"] is None or score > best["score"]:
            best["score"] = score
            save_checkpoint(est, paths["best"])

    est = config.estimator(schema)
    est.fit(train_set, dev=dev_set or None, callback=on_epoch)
    save_checkpoint(est, paths["final"])
    return {"estimator": est, **{k: str(v) for k, v in paths.items()}}
