"""Epoch and inference timing of the joint model against the pairwise baseline."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, replace
from typing import Sequence

import torch

from .data import FieldSchema, LabeledExample
from .training import TrainingConfig

CSV_COLUMNS = ("model", "phase", "documents", "m", "seconds", "encoder_calls")


@dataclass
class BenchRow:
    model: str
    phase: str
    documents: int
    m: int
    seconds: float
    encoder_calls: int

    def as_tuple(self):
        return (self.model, self.phase, self.documents, self.m, f"{self.seconds:.6f}", self.encoder_calls)


def _timed_predict(est, docs):
    before = est.encoder_calls_
    tic = time.perf_counter()
    est.predict(docs)
    return time.perf_counter() - tic, est.encoder_calls_ - before


def run_benchmark(config: TrainingConfig, schema: FieldSchema, examples: Sequence[LabeledExample],
                  train_epochs: int = 1, workers: int = 1, repeats: int = 1,
                  models: Sequence[str] = ("joint", "pairwise")) -> list[BenchRow]:
    """Time training epochs and inference for each model variant.

    Inference is timed single-threaded (``infer``); with ``workers > 1`` a
    second ``infer_concurrent`` row uses that many intra-op threads. The
    best of ``repeats`` runs is reported.
    """
    rows = []
    threads = torch.get_num_threads()
    try:
        for name in models:
            torch.set_num_threads(1)
            cfg = replace(config, model=name, epochs=max(train_epochs, 1))
            est = cfg.estimator(schema)
            if train_epochs > 0:
                est.fit(examples)
                calls = est.encoder_calls_
                for rec in est.history_:
                    rows.append(BenchRow(name, "train_epoch", len(examples), schema.m, rec["epoch_seconds"],
                                         calls // len(est.history_)))
            else:
                est.initialize(examples)
            best = min((_timed_predict(est, examples) for _ in range(repeats)), key=lambda r: r[0])
            rows.append(BenchRow(name, "infer", len(examples), schema.m, *best))
            if workers > 1:
                torch.set_num_threads(workers)
                best = min((_timed_predict(est, examples) for _ in range(repeats)), key=lambda r: r[0])
                rows.append(BenchRow(name, "infer_concurrent", len(examples), schema.m, *best))
    finally:
        torch.set_num_threads(threads)
    return rows


def write_csv(rows: Sequence[BenchRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.as_tuple())
