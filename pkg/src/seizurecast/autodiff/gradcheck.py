"""Central finite-difference gradient checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Sequence

import numpy as np

from seizurecast.autodiff.tensor import Tensor
from seizurecast.core.types import FloatArray

DEFAULT_STEP = 1e-5


def numerical_grad(fn: Callable[[], Tensor], target: Tensor, h: float = DEFAULT_STEP) -> FloatArray:
    """d fn() / d target by central differences, perturbing ``target.data`` in place."""
    if not target.data.flags.c_contiguous:
        target.data = np.ascontiguousarray(target.data)
    grad = np.zeros_like(target.data)
    flat = target.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = fn().item()
        flat[i] = original - h
        minus = fn().item()
        flat[i] = original
        gflat[i] = (plus - minus) / (2.0 * h)
    return grad


def relative_error(analytic: FloatArray, numeric: FloatArray) -> float:
    """‖a − n‖ / max(‖a‖, ‖n‖); 0 when both vanish."""
    denom = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric)) / denom


@dataclass
class GradCheckResult:
    errors: Dict[str, float]

    @property
    def worst(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    def ok(self, tol: float) -> bool:
        return self.worst < tol


def check_gradients(
    fn: Callable[[], Tensor],
    params: Dict[str, Tensor] | Sequence[Tensor],
    h: float = DEFAULT_STEP,
) -> GradCheckResult:
    """Compare tape gradients of ``fn()`` against central differences for each param.

    *fn* must be deterministic (freeze any sampling noise before calling).
    """
    named = params if isinstance(params, dict) else {str(i): p for i, p in enumerate(params)}
    for p in named.values():
        p.zero_grad()
    fn().backward()
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in named.items()
    }
    errors = {
        name: relative_error(analytic[name], numerical_grad(fn, p, h))
        for name, p in named.items()
    }
    for p in named.values():
        p.zero_grad()
    return GradCheckResult(errors=errors)
