"""Full-batch BFGS with Armijo backtracking."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

CURVATURE_EPS = 1e-12
MAX_BACKTRACKS = 60


@dataclass
class BfgsResult:
    x: np.ndarray
    fun: float
    iterations: int
    history: list = field(default_factory=list)  # objective after each iteration
    status: str = "maxiter"


def armijo_backtrack(fun, x, f0, g0, direction, c=1e-4, shrink=0.5, step=1.0,
                     max_backtracks=MAX_BACKTRACKS):
    """Shrink ``step`` until f(x + step*d) <= f0 + c*step*g0.d.

    Returns ``(step, f_new)`` or ``(None, f0)`` when no acceptable step is
    found within ``max_backtracks`` reductions.
    """
    slope = float(g0 @ direction)
    for _ in range(max_backtracks + 1):
        f_new = fun(x + step * direction)
        if np.isfinite(f_new) and f_new <= f0 + c * step * slope:
            return step, f_new
        step *= shrink
    return None, f0


def bfgs_minimize(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    maxiter: int,
    c: float = 1e-4,
    shrink: float = 0.5,
    gtol: float = 0.0,
    callback: Callable[[int, np.ndarray, float], None] | None = None,
) -> BfgsResult:
    """Minimize ``fun`` starting from ``x0``.

    The inverse Hessian estimate starts at the identity and gets the
    standard rank-two update, skipped whenever s.y <= 1e-12. Every
    accepted step satisfies the Armijo condition, so the objective never
    increases. Stops early when the gradient infinity-norm is <= ``gtol``
    or when the line search fails; in both cases the current (best) point
    is returned.
    """
    x = np.array(x0, dtype=float)
    n = x.size
    H = np.eye(n)
    f = float(fun(x))
    g = np.asarray(grad(x), dtype=float)
    result = BfgsResult(x=x, fun=f, iterations=0)
    if not 0.0 < c < 1.0 or not 0.0 < shrink < 1.0:
        raise ValueError("armijo constant and shrink factor must lie in (0, 1)")

    for it in range(maxiter):
        if np.max(np.abs(g), initial=0.0) <= gtol:
            result.status = "converged"
            break
        d = -H @ g
        if g @ d >= 0:
            # estimate lost positive definiteness numerically
            H = np.eye(n)
            d = -g
        step, f_new = armijo_backtrack(fun, x, f, g, d, c=c, shrink=shrink)
        if step is None and not np.allclose(H, np.eye(n)):
            H = np.eye(n)
            d = -g
            step, f_new = armijo_backtrack(fun, x, f, g, d, c=c, shrink=shrink)
        if step is None:
            log.info("line search failed at iteration %d, stopping", it)
            result.status = "linesearch"
            break
        s = step * d
        x_new = x + s
        g_new = np.asarray(grad(x_new), dtype=float)
        y = g_new - g
        sy = float(s @ y)
        if sy > CURVATURE_EPS:
            rho = 1.0 / sy
            Hy = H @ y
            H = (H - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                 + (rho * rho * (y @ Hy) + rho) * np.outer(s, s))
        x, f, g = x_new, float(f_new), g_new
        result.iterations = it + 1
        result.history.append(f)
        if callback is not None:
            callback(it, x, f)
    result.x = x
    result.fun = f
    return result
