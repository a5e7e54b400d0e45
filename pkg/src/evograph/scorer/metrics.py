"""Ranking and correlation metrics."""
from __future__ import annotations

import numpy as np

from .. import _kernels


def roc_auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative (ties count 1/2)."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    u, n_pos, n_neg = _kernels.mann_whitney_u(scores, labels.astype(np.int64))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes")
    return float(u / (n_pos * n_neg))


def pearson(a, b) -> float:
    """Pearson correlation; 0 when either side is constant."""
    a = np.asarray(a, dtype=np.float64) - np.mean(a)
    b = np.asarray(b, dtype=np.float64) - np.mean(b)
    den = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if den < 1e-300 or not np.isfinite(den):
        return 0.0
    return float(np.clip(np.dot(a, b) / den, -1.0, 1.0))


def spearman(a, b) -> float:
    return pearson(_kernels.average_ranks(np.asarray(a, dtype=np.float64)),
                   _kernels.average_ranks(np.asarray(b, dtype=np.float64)))


def correlation_matrix(X: np.ndarray) -> np.ndarray:
    """Pearson correlations between columns; constant columns correlate 0."""
    X = np.asarray(X, dtype=np.float64)
    Xc = X - X.mean(axis=0)
    norms = np.sqrt((Xc * Xc).sum(axis=0))
    safe = np.where(norms > 1e-300, norms, 1.0)
    C = (Xc.T @ Xc) / np.outer(safe, safe)
    C[norms <= 1e-300, :] = 0.0
    C[:, norms <= 1e-300] = 0.0
    return np.clip(C, -1.0, 1.0)
