"""Central finite-difference gradient checker."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

DEFAULT_STEP = 1e-5
DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class GradCheckReport:
    op_name: str
    max_rel_error: float
    worst_index: tuple
    step: float
    passed: bool
    nonfinite: tuple = field(default=())

    def line(self) -> str:
        return (f"GradCheckReport op={self.op_name} max_rel_error={self.max_rel_error:.3e} "
                f"worst_index={self.worst_index} step={self.step:g} passed={self.passed}")


def numerical_gradient(f: Callable[[np.ndarray], float], point, step: float = DEFAULT_STEP):
    x = np.array(point, dtype=np.float64)
    grad = np.empty_like(x)
    for idx in np.ndindex(*x.shape):
        orig = x[idx]
        x[idx] = orig + step
        fp = f(x)
        x[idx] = orig - step
        fm = f(x)
        x[idx] = orig
        grad[idx] = (fp - fm) / (2.0 * step)
    return grad


def grad_check(f: Callable[[np.ndarray], float], point, analytic_grad,
               step: float = DEFAULT_STEP, tol: float = DEFAULT_TOL,
               op_name: str = "op") -> GradCheckReport:
    """Compare ``analytic_grad`` with central differences of ``f`` at ``point``.

    Per-coordinate relative error uses the denominator max(|a|, |n|, 1e-8).
    """
    numeric = numerical_gradient(f, point, step)
    return compare_gradients(analytic_grad, numeric, step, tol, op_name)


def compare_gradients(analytic_grad, numeric_grad, step: float = DEFAULT_STEP,
                      tol: float = DEFAULT_TOL, op_name: str = "op") -> GradCheckReport:
    analytic = np.asarray(analytic_grad, dtype=np.float64)
    numeric = np.asarray(numeric_grad, dtype=np.float64)
    if analytic.shape != numeric.shape:
        raise ValueError(f"gradient shape {analytic.shape} != point shape {numeric.shape}")
    bad = tuple(tuple(int(i) for i in idx)
                for idx in zip(*np.nonzero(~(np.isfinite(numeric) & np.isfinite(analytic)))))
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    rel = np.abs(analytic - numeric) / denom
    rel = np.where(np.isfinite(rel), rel, np.inf)
    flat = int(np.argmax(rel))
    worst = tuple(int(i) for i in np.unravel_index(flat, rel.shape))
    max_rel = float(rel.reshape(-1)[flat])
    return GradCheckReport(op_name, max_rel, worst, step,
                           passed=(not bad) and max_rel < tol and math.isfinite(max_rel),
                           nonfinite=bad)
