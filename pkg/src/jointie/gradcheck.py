"""Central finite-difference check of autograd parameter gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import torch


@dataclass
class GradCheckResult:
    records: list[tuple[str, tuple, float, float, float]] = field(default_factory=list)
    tolerance: float = 1e-4

    @property
    def pass_rate(self) -> float:
        if not self.records:
            return 0.0
        return sum(r[4] < self.tolerance for r in self.records) / len(self.records)

    def covered(self) -> set[str]:
        return {r[0] for r in self.records}

    def worst(self, k: int = 5):
        return sorted(self.records, key=lambda r: -r[4])[:k]


def relative_error(analytic: float, numeric: float, floor: float = 1e-8) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def finite_difference_check(loss_fn: Callable[[], torch.Tensor], params: Mapping[str, torch.Tensor],
                            samples_per_tensor: int = 5, step: float = 1e-5, seed: int = 0,
                            tolerance: float = 1e-4) -> GradCheckResult:
    """Compare autograd gradients of ``loss_fn()`` with central differences.

    ``params`` should be float64 leaves; up to ``samples_per_tensor``
    random coordinates of each are perturbed by ``+-step``.
    """
    for p in params.values():
        p.grad = None
    loss_fn().backward()
    analytic = {name: p.grad.detach().clone() for name, p in params.items() if p.grad is not None}
    gen = torch.Generator().manual_seed(seed)
    result = GradCheckResult(tolerance=tolerance)
    with torch.no_grad():
        for name, p in params.items():
            if name not in analytic:
                continue
            flat = p.view(-1)
            picks = torch.randperm(flat.numel(), generator=gen)[:samples_per_tensor]
            for k in picks.tolist():
                orig = flat[k].item()
                flat[k] = orig + step
                up = loss_fn().item()
                flat[k] = orig - step
                down = loss_fn().item()
                flat[k] = orig
                numeric = (up - down) / (2 * step)
                a = analytic[name].view(-1)[k].item()
                coord = tuple(torch.unravel_index(torch.tensor(k), p.shape)) if p.dim() else ()
                result.records.append((name, tuple(int(c) for c in coord), a, numeric,
                                       relative_error(a, numeric)))
    return result
