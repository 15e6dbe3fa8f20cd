"""Stride windows over long token sequences and per-token averaging."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import torch
import torch.nn.functional as F


@dataclass(frozen=True)
class WindowPlan:
    n: int
    window_length: int
    stride: int
    windows: tuple[tuple[int, int], ...]

    def __len__(self):
        return len(self.windows)

    def coverage(self) -> list[int]:
        """Number of windows containing each position."""
        counts = [0] * self.n
        for a, b in self.windows:
            for j in range(a, b + 1):
                counts[j] += 1
        return counts


def expected_window_count(n: int, window_length: int, stride: int) -> int:
    return math.ceil(max(n - window_length, 0) / stride) + 1


def plan_windows(n: int, window_length: int, stride: int) -> WindowPlan:
    """Windows start at multiples of ``stride``; the last one reaches n-1."""
    if window_length < 1 or not 1 <= stride <= window_length:
        raise ValueError(f"need window_length >= 1 and 1 <= stride <= window_length, "
                         f"got {window_length}, {stride}")
    if n < 1:
        raise ValueError("cannot window an empty sequence")
    windows = []
    start = 0
    while True:
        end = min(start + window_length, n) - 1
        windows.append((start, end))
        if end >= n - 1:
            break
        start += stride
    return WindowPlan(n, window_length, stride, tuple(windows))


@dataclass
class EncodedDocument:
    """Per-token vectors after averaging, one row per input position."""

    vectors: torch.Tensor

    def __post_init__(self):
        if self.vectors.dim() != 2:
            raise ValueError("vectors must be an (n, c) matrix")

    @property
    def n(self):
        return self.vectors.shape[0]

    @property
    def encoder_dim(self):
        return self.vectors.shape[1]


def average_windows(window_vectors: Sequence[torch.Tensor], plan: WindowPlan) -> torch.Tensor:
    """Average each position's vectors over the windows that contain it.

    ``window_vectors[w]`` holds at least ``len(window w)`` rows; extra rows
    (padding) are ignored. Summation runs in window order, so the result is
    reproducible, and the operation stays differentiable.
    """
    if len(window_vectors) != len(plan):
        raise ValueError(f"{len(window_vectors)} window encodings for a plan of {len(plan)}")
    total = None
    for (a, b), vecs in zip(plan.windows, window_vectors):
        part = F.pad(vecs[: b - a + 1], (0, 0, a, plan.n - b - 1))
        total = part if total is None else total + part
    counts = torch.tensor(plan.coverage(), dtype=total.dtype, device=total.device)
    return total / counts[:, None]


class WindowEncodingError(RuntimeError):
    def __init__(self, window_index, cause):
        self.window_index = window_index
        super().__init__(f"encoder failed on window {window_index}: {cause}")


def encode_with_averaging(token_ids: Sequence[int], plan: WindowPlan,
                          encoder: Callable[[Sequence[int]], torch.Tensor]) -> EncodedDocument:
    """Encode every window separately and average the overlapping rows.

    ``encoder`` maps a list of ids to a (k, c) matrix, e.g.
    ``ToyTransformerEncoder.encode``.
    """
    if plan.n != len(token_ids):
        raise ValueError(f"plan covers {plan.n} positions, sequence has {len(token_ids)}")
    outs = []
    for w, (a, b) in enumerate(plan.windows):
        try:
            outs.append(encoder(list(token_ids[a:b + 1])))
        except Exception as exc:
            raise WindowEncodingError(w, exc) from exc
    return EncodedDocument(average_windows(outs, plan))
