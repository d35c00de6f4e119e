"""Central-difference gradient checking."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numeric import CogfuseError, ShapeError

__all__ = ["NonFiniteEvaluationError", "GradReport", "finite_diff_grad", "check_grads"]

REL_EPS = 1e-12


class NonFiniteEvaluationError(CogfuseError, ArithmeticError):
    def __init__(self, index: int, value: float):
        super().__init__(f"function value {value!r} is not finite when perturbing coordinate {index}")
        self.index = index


@dataclass(frozen=True)
class GradReport:
    max_rel_err: float
    max_abs_err: float
    worst_index: int
    passed: bool


def finite_diff_grad(f: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """``(f(x + h e_i) - f(x - h e_i)) / 2h`` for every coordinate of ``x``.

    ``x`` may have any shape; the result has the same shape.
    """
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    x = np.array(x, dtype=np.float64)
    grad = np.empty_like(x)
    flat = x.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        for v in (fp, fm):
            if not np.isfinite(v):
                raise NonFiniteEvaluationError(i, v)
        grad.reshape(-1)[i] = (fp - fm) / (2.0 * h)
    return grad


def check_grads(analytic, numeric, tol_rel: float = 1e-4, tol_abs: float = 1e-7) -> GradReport:
    """Compare two gradients coordinate by coordinate.

    Relative error is ``|a - n| / max(|a|, |n|, 1e-12)``. The report passes
    when the worst relative error is within ``tol_rel`` or the worst
    absolute error is within ``tol_abs``.
    """
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    if a.shape != n.shape:
        raise ShapeError(f"gradient lengths differ: {a.size} vs {n.size}")
    if a.size == 0:
        return GradReport(0.0, 0.0, -1, True)
    abs_err = np.abs(a - n)
    rel_err = abs_err / np.maximum(np.maximum(np.abs(a), np.abs(n)), REL_EPS)
    worst = int(np.argmax(rel_err))
    max_rel = float(rel_err[worst])
    max_abs = float(abs_err.max())
    return GradReport(max_rel, max_abs, worst, max_rel <= tol_rel or max_abs <= tol_abs)
