"""Stratified cross-validation of the ridge readout, scored by ROC-AUC."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import roc_auc
from .ridge import ALPHA_GRID, AllConstantError, RidgeFit, irls_fit, loo_select_alpha, standardize


def stratified_folds(y, n_folds: int, seed: int) -> np.ndarray:
    """Fold index per sample.

    Samples are ordered by label, shuffled within each class with a seeded
    generator, then dealt round-robin to the folds.
    """
    y = np.asarray(y).ravel()
    if n_folds < 2:
        raise ValueError("n_folds must be >= 2")
    rng = np.random.default_rng(seed)
    order = []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        order.extend(idx[rng.permutation(len(idx))])
    folds = np.empty(len(y), dtype=np.int64)
    folds[np.asarray(order, dtype=np.int64)] = np.arange(len(order)) % n_folds
    return folds


@dataclass
class FoldResult:
    auc: float
    fit: RidgeFit | None  # None when every training column was constant
    coefficients: np.ndarray  # per input column, zero for dropped ones
    alpha: float
    loo_mse: np.ndarray | None
    val_index: np.ndarray
    irls_fallback: bool = False


@dataclass
class CVResult:
    mean_auc: float
    folds: list
    oof_prediction: np.ndarray
    oof_residual: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def fold_aucs(self) -> list:
        return [f.auc for f in self.folds]

    @property
    def fold_coefficients(self) -> np.ndarray:
        """(n_folds, n_columns) coefficients on the standardised scale."""
        return np.stack([f.coefficients for f in self.folds])


def cv_score(X, y, n_folds: int = 3, seed: int = 0, alpha_grid=ALPHA_GRID, weights=None,
             g=None, irls_iters: int = 3, irls_floor: float = 1e-6) -> CVResult:
    """Mean validation AUC of the ridge readout over stratified folds.

    Each fold standardises on its training part, chooses alpha by closed-form
    LOO with the base weights, then fits (with IRLS when ``g`` is given).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).ravel()
    n, p = X.shape
    counts = np.bincount(y.astype(np.int64), minlength=2)
    if counts.min() < n_folds:
        raise ValueError(f"each class needs at least {n_folds} samples, got {counts.tolist()}")
    w_all = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64).ravel()
    folds = stratified_folds(y, n_folds, seed)
    yf = y.astype(np.float64)
    results = []
    oof_pred = np.zeros(n)
    for k in range(n_folds):
        tr, va = np.flatnonzero(folds != k), np.flatnonzero(folds == k)
        coef_full = np.zeros(p)
        w_tr = w_all[tr]
        if w_tr.sum() <= 0:
            w_tr = np.ones(len(tr))
        try:
            st = standardize(X[tr])
        except AllConstantError:
            oof_pred[va] = float(np.average(yf[tr], weights=w_tr))
            results.append(FoldResult(0.5, None, coef_full, float("nan"), None, va))
            continue
        alpha, mse = loo_select_alpha(st.Xs, yf[tr], alpha_grid, w_tr)
        fit = irls_fit(st.Xs, yf[tr], alpha, w_tr, g, irls_iters, irls_floor)
        fit.feature_means, fit.feature_stds = st.means, st.stds
        coef_full[st.kept] = fit.coefficients
        pred = fit.predict(st.apply(X[va]))
        oof_pred[va] = pred
        results.append(FoldResult(roc_auc(pred, y[va]), fit, coef_full, alpha, mse, va,
                                  bool(fit.info.get("fallback"))))
    return CVResult(float(np.mean([r.auc for r in results])), results, oof_pred, yf - oof_pred)
