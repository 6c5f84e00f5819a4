"""Finite-difference verification of analytic gradients.

Every differentiable operation the scorers use is validated against central
differences in float64. The function under test receives a dict of named
parameter Tensors and must return a scalar Tensor; hinge-style kinks must be
avoided by the caller (the check is only meaningful where the function is
twice differentiable).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from ..errors import NumericError
from .autodiff import Tensor, no_grad


@dataclass
class GradCheckReport:
    max_rel_error: float
    tol: float
    worst: tuple[str, int]  # parameter name, flat coordinate
    per_param: dict[str, float]

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol


def _evaluate(f: Callable, arrays: Mapping[str, np.ndarray]) -> float:
    with no_grad():
        out = f({k: Tensor(v) for k, v in arrays.items()})
    val = out.item()
    if not np.isfinite(val):
        raise NumericError("non-finite evaluation during gradient check")
    return val


def grad_check(
    f: Callable[[Mapping[str, Tensor]], Tensor],
    params: Mapping[str, np.ndarray],
    h: float = 1e-5,
    tol: float = 1e-4,
    floor: float = 1e-6,
) -> GradCheckReport:
    """Compare analytic gradients of f against central differences.

    Relative error per coordinate is |a - n| / max(|a|, |n|, floor); the check
    passes when the maximum over all coordinates is below tol.
    """
    if h <= 0:
        raise NumericError("finite-difference step h must be > 0")
    arrays = {k: np.asarray(v, dtype=np.float64).copy() for k, v in params.items()}
    tensors = {k: Tensor(v.copy(), requires_grad=True) for k, v in arrays.items()}
    out = f(tensors)
    if out.data.size != 1:
        raise NumericError("grad_check target must return a scalar")
    if not np.isfinite(out.item()):
        raise NumericError("non-finite evaluation during gradient check")
    out.backward()
    analytic = {
        k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in tensors.items()
    }

    per_param: dict[str, float] = {}
    worst = ("", -1)
    max_rel = 0.0
    for name, base in arrays.items():
        flat = base.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        param_max = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = _evaluate(f, arrays)
            flat[i] = orig - h
            down = _evaluate(f, arrays)
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            a = float(a_flat[i])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            if rel > param_max:
                param_max = rel
            if rel > max_rel:
                max_rel = rel
                worst = (name, i)
        per_param[name] = param_max
    return GradCheckReport(max_rel_error=max_rel, tol=tol, worst=worst, per_param=per_param)
