"""Clustering accuracy and the error functionals of a kernel approximation."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .kernel import DENSE_CAP


def _dense_labels(labels: np.ndarray) -> np.ndarray:
    return np.unique(labels, return_inverse=True)[1].ravel()


def confusion_matrix(predicted, truth) -> np.ndarray:
    """Counts with predicted clusters as rows and true classes as columns."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape or predicted.ndim != 1:
        raise ValueError(f"length mismatch: {predicted.shape} vs {truth.shape}")
    p = _dense_labels(predicted)
    t = _dense_labels(truth)
    M = np.zeros((p.max() + 1 if p.size else 0, t.max() + 1 if t.size else 0), dtype=np.int64)
    np.add.at(M, (p, t), 1)
    return M


def clustering_accuracy(predicted, truth) -> float:
    """Fraction of samples correct under the best one-to-one cluster-to-class matching."""
    M = confusion_matrix(predicted, truth)
    if M.size == 0:
        raise ValueError("empty labelings")
    rows, cols = linear_sum_assignment(M, maximize=True)
    return float(M[rows, cols].sum() / M.sum())


class ErrorFunctionals(NamedTuple):
    trace_norm: float
    trace: float
    spectral: float
    frobenius: float


def error_functionals(K_exact: np.ndarray, K_hat: np.ndarray, cap: int = DENSE_CAP) -> ErrorFunctionals:
    """Norms of E = K_exact - K_hat (E may be indefinite, so singular values are used)."""
    K_exact = np.asarray(K_exact, dtype=np.float64)
    K_hat = np.asarray(K_hat, dtype=np.float64)
    if K_exact.shape != K_hat.shape or K_exact.ndim != 2 or K_exact.shape[0] != K_exact.shape[1]:
        raise ValueError("need two square matrices of equal size")
    if K_exact.shape[0] > cap:
        raise MemoryError(f"n={K_exact.shape[0]} exceeds the dense cap of {cap}")
    E = K_exact - K_hat
    s = np.linalg.svd(E, compute_uv=False)
    return ErrorFunctionals(
        trace_norm=float(s.sum()),
        trace=float(np.trace(E)),
        spectral=float(s[0]) if s.size else 0.0,
        frobenius=float(np.linalg.norm(E, "fro")),
    )
