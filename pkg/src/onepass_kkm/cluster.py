"""K-means on embedded points, full kernel K-means, and exhaustive partition search."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .approx import rng_for
from .kernel import DENSE_CAP, KernelSpec, kernel_matrix

_KMEANS_STREAM = 100
BRUTE_FORCE_MAX_N = 12
BRUTE_FORCE_MAX_K = 3


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray
    n_clusters: int
    objective: float
    history: tuple = field(default=(), compare=False)
    n_iter: int = 0

    def indicator(self) -> np.ndarray:
        return indicator_matrix(self.labels, self.n_clusters)


def _check_labels(labels, n_clusters: int | None = None) -> tuple[np.ndarray, int]:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ValueError("labels must be a non-empty 1-D sequence")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValueError("labels must be integers")
    if n_clusters is None:
        n_clusters = int(labels.max()) + 1
    if labels.min() < 0 or labels.max() >= n_clusters:
        raise ValueError(f"labels must lie in [0, {n_clusters})")
    counts = np.bincount(labels, minlength=n_clusters)
    if np.any(counts == 0):
        raise ValueError(f"empty clusters: {np.flatnonzero(counts == 0).tolist()}")
    return labels.astype(np.intp), n_clusters


def indicator_matrix(labels, n_clusters: int | None = None) -> np.ndarray:
    """Normalized K x n indicator: entry 1/sqrt(|S_k|) at (label_j, j)."""
    labels, k = _check_labels(labels, n_clusters)
    counts = np.bincount(labels, minlength=k)
    C = np.zeros((k, labels.size))
    C[labels, np.arange(labels.size)] = 1.0 / np.sqrt(counts[labels])
    return C


def trace_objective(K: np.ndarray, labels, n_clusters: int | None = None) -> float:
    """trace((I - C^T C) K (I - C^T C)) for the indicator C of ``labels``."""
    K = np.asarray(K, dtype=np.float64)
    C = indicator_matrix(labels, n_clusters)
    if K.shape != (C.shape[1], C.shape[1]):
        raise ValueError("kernel matrix and labels disagree in size")
    P = np.eye(K.shape[0]) - C.T @ C
    return float(np.trace(P @ K @ P))


def sum_form_objective(K: np.ndarray, labels, n_clusters: int | None = None) -> float:
    """Sum over samples of the feature-space distance to the own-cluster centroid.

    Distances come from kernel entries only:
    K_ii - 2/|S| sum_l K_il + 1/|S|^2 sum_{l,l'} K_ll'.
    """
    K = np.asarray(K, dtype=np.float64)
    labels, k = _check_labels(labels, n_clusters)
    members = [np.flatnonzero(labels == c) for c in range(k)]
    within = [K[np.ix_(m, m)].sum() / m.size**2 for m in members]
    total = 0.0
    for i, c in enumerate(labels):
        m = members[c]
        total += K[i, i] - 2.0 * K[i, m].sum() / m.size + within[c]
    return float(total)


def _kmeanspp(dist_to: Callable[[int], np.ndarray], n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++ seeding.

    ``dist_to(j)`` gives squared distances from every sample to sample j.
    Each new center is the best of ``2 + ln k`` candidates drawn with
    probability proportional to the current squared distance.
    """
    n_trials = 2 + int(np.log(k))
    chosen = [int(rng.integers(n))]
    d = dist_to(chosen[0])
    for _ in range(1, k):
        total = d.sum()
        if total <= 0:
            j = int(rng.integers(n))
            chosen.append(j)
            d = np.minimum(d, dist_to(j))
            continue
        candidates = rng.choice(n, size=n_trials, p=d / total)
        best_j, best_d, best_pot = -1, None, np.inf
        for j in candidates:
            cand = np.minimum(d, dist_to(int(j)))
            pot = cand.sum()
            if pot < best_pot:
                best_j, best_d, best_pot = int(j), cand, pot
        chosen.append(best_j)
        d = best_d
    return np.array(chosen, dtype=np.intp)


def _repair_empty(labels: np.ndarray, D: np.ndarray, k: int) -> np.ndarray:
    counts = np.bincount(labels, minlength=k)
    empty = np.flatnonzero(counts == 0)
    if empty.size == 0:
        return labels
    labels = labels.copy()
    own = D[np.arange(labels.size), labels].astype(np.float64)
    for c in empty:
        own_masked = np.where(counts[labels] > 1, own, -np.inf)
        i = int(np.argmax(own_masked))
        counts[labels[i]] -= 1
        labels[i] = c
        counts[c] = 1
        own[i] = -np.inf
    return labels


def _lloyd(D0: np.ndarray, distances: Callable[[np.ndarray], np.ndarray], k: int, max_iter: int):
    """Alternate nearest-centroid assignment and centroid update.

    ``distances(labels)`` returns the n x k squared distances to the
    centroids of the partition ``labels``. Stops when no label changes.
    """
    D = D0
    labels = None
    history = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new = np.argmin(D, axis=1)  # first index on ties
        if labels is not None and np.array_equal(new, labels):
            n_iter -= 1
            break
        labels = _repair_empty(new, D, k)
        D = distances(labels)
        history.append(float(D[np.arange(labels.size), labels].sum()))
    return labels, history, n_iter


def _sqdist(P: np.ndarray, centers: np.ndarray) -> np.ndarray:
    D = (P * P).sum(1)[:, None] + (centers * centers).sum(1)[None, :] - 2.0 * (P @ centers.T)
    return np.maximum(D, 0.0)


def _means(P: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.zeros((k, P.shape[1]))
    np.add.at(sums, labels, P)
    return sums / counts[:, None]


def _best(runs: list[ClusterAssignment]) -> ClusterAssignment:
    return min(runs, key=lambda a: a.objective)  # first on ties


def kmeans(Y, n_clusters: int, restarts: int = 10, max_iter: int = 20, seed: int = 0,
           init: np.ndarray | None = None) -> ClusterAssignment:
    """Best-of-restarts Lloyd's algorithm with k-means++ seeding.

    ``Y`` is r x n with one sample per column. ``init`` fixes the initial
    centers to the given sample indices (a single run then).
    """
    P = np.asarray(Y, dtype=np.float64).T
    n = P.shape[0]
    if not 1 <= n_clusters <= n:
        raise ValueError(f"need 1 <= K <= n, got K={n_clusters}, n={n}")
    if max_iter < 1 or restarts < 1:
        raise ValueError("max_iter and restarts must be positive")
    sq = (P * P).sum(1)

    def dist_to(j):
        return np.maximum(sq + sq[j] - 2.0 * (P @ P[j]), 0.0)

    def distances(labels):
        return _sqdist(P, _means(P, labels, n_clusters))

    starts = [np.asarray(init, dtype=np.intp)] if init is not None else [
        _kmeanspp(dist_to, n, n_clusters, rng_for(seed, _KMEANS_STREAM, t)) for t in range(restarts)
    ]
    runs = []
    for idx in starts:
        labels, history, n_iter = _lloyd(_sqdist(P, P[idx]), distances, n_clusters, max_iter)
        runs.append(ClusterAssignment(labels, n_clusters, history[-1], tuple(history), n_iter))
    return _best(runs)


def kernel_kmeans_full(X, spec: KernelSpec, n_clusters: int, max_iter: int = 20, restarts: int = 10,
                       seed: int = 0, init: np.ndarray | None = None, cap: int = DENSE_CAP,
                       K: np.ndarray | None = None) -> ClusterAssignment:
    """Kernel K-means on the full kernel matrix.

    Distances to implicit centroids use kernel entries only, and the
    seeding is k-means++ in feature space. Pass ``K`` to reuse a matrix
    already formed from ``X``.
    """
    if K is None:
        K = kernel_matrix(X, spec, cap=cap)
    n = K.shape[0]
    if not 1 <= n_clusters <= n:
        raise ValueError(f"need 1 <= K <= n, got K={n_clusters}, n={n}")
    diag = np.diag(K).copy()

    def dist_to(j):
        return np.maximum(diag + K[j, j] - 2.0 * K[:, j], 0.0)

    def distances(labels):
        counts = np.bincount(labels, minlength=n_clusters).astype(np.float64)
        M = np.zeros((n, n_clusters))
        M[np.arange(n), labels] = 1.0 / counts[labels]
        KM = K @ M
        within = np.einsum("ik,ik->k", M, KM)
        return np.maximum(diag[:, None] - 2.0 * KM + within[None, :], 0.0)

    starts = [np.asarray(init, dtype=np.intp)] if init is not None else [
        _kmeanspp(dist_to, n, n_clusters, rng_for(seed, _KMEANS_STREAM, t)) for t in range(restarts)
    ]
    runs = []
    for idx in starts:
        D0 = np.maximum(diag[:, None] + diag[idx][None, :] - 2.0 * K[:, idx], 0.0)
        labels, history, n_iter = _lloyd(D0, distances, n_clusters, max_iter)
        runs.append(ClusterAssignment(labels, n_clusters, history[-1], tuple(history), n_iter))
    return _best(runs)


def _partitions(n: int, k: int) -> np.ndarray:
    """All labelings of n items into exactly k non-empty clusters, one per partition.

    Canonical form: labels appear in first-use order (restricted growth strings).
    """
    tails = np.array(list(itertools.product(range(k), repeat=n - 1)), dtype=np.int8).reshape(-1, n - 1)
    L = np.concatenate([np.zeros((tails.shape[0], 1), dtype=np.int8), tails], axis=1)
    prefix_max = np.maximum.accumulate(L, axis=1)
    ok = np.all(L[:, 1:] <= prefix_max[:, :-1] + 1, axis=1) & (prefix_max[:, -1] == k - 1)
    return L[ok]


def brute_force_optimal(K: np.ndarray, n_clusters: int) -> ClusterAssignment:
    """Exact minimizer of the kernel K-means objective by enumerating every partition."""
    K = np.asarray(K, dtype=np.float64)
    n = K.shape[0]
    if K.shape != (n, n):
        raise ValueError("K must be square")
    if n > BRUTE_FORCE_MAX_N or n_clusters > BRUTE_FORCE_MAX_K:
        raise ValueError(f"enumeration limited to n <= {BRUTE_FORCE_MAX_N}, K <= {BRUTE_FORCE_MAX_K}")
    if not 1 <= n_clusters <= n:
        raise ValueError("need 1 <= K <= n")
    L = _partitions(n, n_clusters)
    # objective = trace(K) - sum_k (1/|S_k|) 1_k^T K 1_k, batched over labelings
    value = np.full(L.shape[0], np.trace(K))
    for c in range(n_clusters):
        M = (L == c).astype(np.float64)
        value -= np.einsum("ai,ai->a", M @ K, M) / M.sum(1)
    best = int(np.argmin(value))
    labels = L[best].astype(np.intp)
    return ClusterAssignment(labels, n_clusters, trace_objective(K, labels, n_clusters))
