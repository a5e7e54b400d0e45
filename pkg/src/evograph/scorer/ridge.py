"""Closed-form weighted ridge regression via the SVD, with leave-one-out
regularisation selection and iteratively reweighted refits.

The intercept is unpenalised: the design is centred with the (weighted)
feature means, the SVD is taken of the sqrt-weight-scaled centred design, and
the intercept is recovered from the means afterwards.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ALPHA_GRID = (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3)
LEVERAGE_CAP = 1.0 - 1e-12
CONSTANT_STD = 1e-12


class AllConstantError(ValueError):
    pass


@dataclass
class Standardization:
    Xs: np.ndarray
    means: np.ndarray  # per original column
    stds: np.ndarray  # per original column (1.0 for dropped ones)
    kept: np.ndarray  # indices of retained columns
    dropped: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return (X[:, self.kept] - self.means[self.kept]) / self.stds[self.kept]


def standardize(X) -> Standardization:
    """Zero-mean, unit population-std columns; near-constant columns are dropped."""
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ValueError("standardize: non-finite values")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    kept = np.flatnonzero(stds >= CONSTANT_STD)
    dropped = np.flatnonzero(stds < CONSTANT_STD)
    if kept.size == 0:
        raise AllConstantError("all feature columns are constant")
    stds = np.where(stds >= CONSTANT_STD, stds, 1.0)
    Xs = (X[:, kept] - means[kept]) / stds[kept]
    return Standardization(Xs, means, stds, kept, dropped)


@dataclass
class RidgeFit:
    coefficients: np.ndarray
    intercept: float
    alpha: float
    singular_values: np.ndarray
    feature_means: np.ndarray | None = None
    feature_stds: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def predict(self, Xs: np.ndarray) -> np.ndarray:
        return np.asarray(Xs, dtype=np.float64) @ self.coefficients + self.intercept


def normalize_weights(weights, n: int) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.shape[0] != n:
        raise ValueError(f"weights have length {w.shape[0]}, expected {n}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise ValueError("weights sum to zero")
    return w * (n / total)


@dataclass
class _Decomposition:
    U: np.ndarray
    s: np.ndarray
    Vt: np.ndarray
    x_mean: np.ndarray
    y_mean: float
    sw: np.ndarray  # sqrt weights
    w: np.ndarray


def _decompose(Xs, y, w) -> _Decomposition:
    total = w.sum()
    x_mean = (w @ Xs) / total
    y_mean = float(w @ y / total)
    sw = np.sqrt(w)
    A = sw[:, None] * (Xs - x_mean)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return _Decomposition(U, s, Vt, x_mean, y_mean, sw, w)


def _solve(d: _Decomposition, y, alpha) -> tuple[np.ndarray, float]:
    b = d.sw * (y - d.y_mean)
    shrink = d.s / (d.s ** 2 + alpha)
    beta = d.Vt.T @ (shrink * (d.U.T @ b))
    intercept = d.y_mean - float(d.x_mean @ beta)
    return beta, intercept


def ridge_fit(Xs, y, alpha: float, weights=None) -> RidgeFit:
    """Minimise sum_i w_i (y_i - x_i.beta - b)^2 + alpha |beta|^2.

    Weights are rescaled to mean 1 first so ``alpha`` keeps its meaning
    whatever their overall scale.
    """
    Xs = np.asarray(Xs, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if not (np.all(np.isfinite(Xs)) and np.all(np.isfinite(y))):
        raise ValueError("ridge_fit: non-finite inputs")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    w = normalize_weights(weights, Xs.shape[0])
    d = _decompose(Xs, y, w)
    beta, b0 = _solve(d, y, alpha)
    return RidgeFit(beta, b0, float(alpha), d.s)


def _loo_residuals(d: _Decomposition, Xs, y, alpha) -> np.ndarray:
    beta, b0 = _solve(d, y, alpha)
    resid = y - (Xs @ beta + b0)
    # leverage: the intercept's share w_i / sum(w) plus the centred part,
    # read off the left singular vectors of the sqrt-weight-scaled design
    factor = d.s ** 2 / (d.s ** 2 + alpha)
    h = d.w / d.w.sum() + (d.U ** 2) @ factor
    h = np.minimum(h, LEVERAGE_CAP)
    return resid / (1.0 - h)


def loo_errors(Xs, y, alpha: float, weights=None) -> np.ndarray:
    """Closed-form leave-one-out residuals for every sample."""
    Xs = np.asarray(Xs, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    d = _decompose(Xs, y, normalize_weights(weights, Xs.shape[0]))
    return _loo_residuals(d, Xs, y, alpha)


def loo_select_alpha(Xs, y, grid=ALPHA_GRID, weights=None) -> tuple[float, np.ndarray]:
    """Pick alpha minimising the weighted mean squared LOO error; ties go to larger alpha."""
    Xs = np.asarray(Xs, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    grid = tuple(float(a) for a in grid)
    if any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] <= 0:
        raise ValueError("alpha grid must be positive and strictly increasing")
    w = normalize_weights(weights, Xs.shape[0])
    d = _decompose(Xs, y, w)
    mse = np.empty(len(grid))
    for i, alpha in enumerate(grid):
        e = _loo_residuals(d, Xs, y, alpha)
        mse[i] = float(w @ (e * e) / w.sum())
    best = 0
    for i in range(1, len(grid)):
        if mse[i] <= mse[best]:
            best = i
    return grid[best], mse


def irls_fit(Xs, y, alpha: float, base_weights=None, g=None, iters: int = 3,
             floor: float = 1e-6, tol: float = 1e-8) -> RidgeFit:
    """Ridge refits with weights ``base * g(residual)``.

    ``g`` maps a residual vector to nonnegative weights. Weights are floored at
    ``floor`` and rescaled to mean 1 inside :func:`ridge_fit`. Iteration stops
    after ``iters`` refits or once no coefficient moves by ``tol``. If ``g``
    raises or returns unusable weights, the base-weight fit is returned with
    ``info["fallback"]`` set.
    """
    Xs = np.asarray(Xs, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    base = normalize_weights(base_weights, Xs.shape[0])
    fit = ridge_fit(Xs, y, alpha, base)
    fit.info = {"iterations": 0, "weights": base, "fallback": False}
    if g is None:
        return fit
    base_fit = fit
    for it in range(iters):
        resid = y - fit.predict(Xs)
        try:
            gw = np.broadcast_to(np.asarray(g(resid), dtype=np.float64), resid.shape)
            if not np.all(np.isfinite(gw)):
                raise ValueError("residual weights are not finite")
            w = np.maximum(base * gw, floor)
            new = ridge_fit(Xs, y, alpha, w)
        except Exception as exc:  # noqa: BLE001 - any failure of g falls back
            base_fit.info = {"iterations": 0, "weights": base, "fallback": True, "error": str(exc)}
            return base_fit
        delta = float(np.max(np.abs(new.coefficients - fit.coefficients))) if new.coefficients.size else 0.0
        new.info = {"iterations": it + 1, "weights": normalize_weights(w, len(w)), "fallback": False}
        fit = new
        if delta < tol:
            break
    return fit
