"""Limited-memory BFGS with a backtracking Armijo line search."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np


@dataclass
class LbfgsResult:
    x: np.ndarray
    loss: float
    trajectory: list = field(default_factory=list)  # loss at start and after each accepted step
    iterations: int = 0
    stop_reason: str = ""


def minimize(fun, x0, max_iter: int = 20, memory: int = 10, c1: float = 1e-4,
             max_backtracks: int = 20, grad_tol: float = 1e-10) -> LbfgsResult:
    """Minimise ``fun(x) -> (loss, grad)``.

    Every accepted step satisfies the Armijo condition, so the recorded loss
    trajectory is nonincreasing. Trial points with non-finite loss are treated
    as failed and the step is halved.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = fun(x)
    g = np.asarray(g, dtype=np.float64)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        return LbfgsResult(x, float(f), [float(f)], 0, "nonfinite_start")
    trajectory = [float(f)]
    history: deque = deque(maxlen=memory)
    reason = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(g)) <= grad_tol:
            reason = "converged"
            it -= 1
            break
        d = -_two_loop(g, history)
        slope = float(g @ d)
        if slope >= 0:  # not a descent direction: restart from steepest descent
            history.clear()
            d = -g
            slope = float(g @ d)
        step = 1.0 if history else min(1.0, 1.0 / max(np.sum(np.abs(g)), 1e-12))
        accepted = False
        for _ in range(max_backtracks + 1):
            x_new = x + step * d
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= f + c1 * step * slope and \
                    np.all(np.isfinite(g_new)):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            reason = "line_search_failed"
            it -= 1
            break
        g_new = np.asarray(g_new, dtype=np.float64)
        s, yv = x_new - x, g_new - g
        if float(s @ yv) > 1e-10:
            history.append((s, yv, 1.0 / float(s @ yv)))
        x, f, g = x_new, float(f_new), g_new
        trajectory.append(f)
    return LbfgsResult(x, f, trajectory, it, reason)


def _two_loop(g, history) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(history):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    if history:
        s, y, _ = history[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y, rho), a in zip(history, reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return q
