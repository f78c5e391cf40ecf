import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from onepass_kkm.cluster import (
    _partitions,
    brute_force_optimal,
    indicator_matrix,
    kernel_kmeans_full,
    kmeans,
    sum_form_objective,
    trace_objective,
)
from onepass_kkm.kernel import KernelSpec, kernel_matrix

POLY2 = KernelSpec.polynomial(2)
RBF = KernelSpec.rbf(0.5)


def embedding(K):
    # Cholesky of a PSD matrix, jittered only as much as needed
    n = K.shape[0]
    return np.linalg.cholesky(K + 1e-12 * np.trace(K) * np.eye(n)).T


def kmeans_cost(P, labels):
    # P is d x n; sum of squared distances to cluster means
    return sum(np.sum((P[:, labels == c] - P[:, labels == c].mean(1, keepdims=True)) ** 2)
               for c in np.unique(labels))


@st.composite
def labelings(draw, max_n=16):
    n = draw(st.integers(2, max_n))
    k = draw(st.integers(1, min(4, n)))
    head = list(range(k))
    tail = draw(st.lists(st.integers(0, k - 1), min_size=n - k, max_size=n - k))
    perm = draw(st.permutations(head + tail))
    return np.array(perm), k


class TestKMeans:
    def test_two_points(self):
        a = kmeans(np.array([[0.0, 5.0]]), 2)
        assert sorted(a.labels) == [0, 1] and a.objective == 0.0

    def test_matches_exhaustive_optimum(self, rng):
        P = rng.standard_normal((2, 8))
        best = min(kmeans_cost(P, np.array((0,) + rest))
                   for rest in itertools.product((0, 1), repeat=7) if 1 in rest)
        a = kmeans(P, 2, restarts=50)
        assert abs(a.objective - best) < 1e-10
        assert abs(kmeans_cost(P, a.labels) - a.objective) < 1e-10

    def test_objective_history_non_increasing(self, rng):
        P = rng.standard_normal((3, 200))
        for seed in range(5):
            a = kmeans(P, 5, restarts=1, max_iter=50, seed=seed)
            h = np.array(a.history)
            assert np.all(np.diff(h) <= 1e-10)
            assert a.objective == h[-1]

    def test_fixed_init_single_run(self, rng):
        P = rng.standard_normal((2, 30))
        a = kmeans(P, 3, init=np.array([0, 1, 2]))
        b = kmeans(P, 3, init=np.array([0, 1, 2]), restarts=7, seed=99)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_deterministic(self, rng):
        P = rng.standard_normal((2, 100))
        a, b = kmeans(P, 4, seed=3), kmeans(P, 4, seed=3)
        assert a.labels.tobytes() == b.labels.tobytes() and a.objective == b.objective

    def test_every_cluster_non_empty(self):
        # many duplicates make empty clusters likely without repair
        P = np.array([[0.0] * 10 + [1.0] * 10 + [2.0]])
        a = kmeans(P, 5, restarts=3)
        assert np.all(np.bincount(a.labels, minlength=5) > 0)

    @pytest.mark.parametrize("k", [0, 4])
    def test_invalid_cluster_count(self, k):
        with pytest.raises(ValueError):
            kmeans(np.zeros((1, 3)), k)


class TestKernelKMeans:
    def test_linear_kernel_reduces_to_kmeans(self, rng):
        X = rng.standard_normal((2, 60))
        init = np.array([3, 17, 42])
        a = kmeans(X, 3, init=init)
        b = kernel_kmeans_full(X, KernelSpec.polynomial(1), 3, init=init)
        np.testing.assert_array_equal(a.labels, b.labels)
        assert abs(a.objective - b.objective) < 1e-9 * a.objective

    def test_objective_matches_trace_form(self, rng):
        X = rng.standard_normal((3, 40))
        a = kernel_kmeans_full(X, RBF, 3)
        K = kernel_matrix(X, RBF)
        assert abs(a.objective - trace_objective(K, a.labels, 3)) < 1e-8 * a.objective

    def test_distances_match_explicit_embedding(self, rng):
        X = rng.standard_normal((2, 10))
        K = kernel_matrix(X, RBF)
        P = embedding(K)
        init = np.array([0, 5])
        a = kernel_kmeans_full(X, RBF, 2, init=init, max_iter=1)
        # one step from the init: nearest of the two seed points in feature space
        d = np.stack([np.sum((P - P[:, [j]]) ** 2, axis=0) for j in init], axis=1)
        np.testing.assert_array_equal(a.labels, np.argmin(d, axis=1))
        assert abs(a.objective - kmeans_cost(P, a.labels)) < 1e-8

    def test_history_non_increasing(self, rng):
        X = rng.standard_normal((2, 80))
        a = kernel_kmeans_full(X, POLY2, 4, restarts=1, max_iter=50)
        assert np.all(np.diff(a.history) <= 1e-10)

    def test_cap(self, rng):
        with pytest.raises(MemoryError):
            kernel_kmeans_full(rng.standard_normal((2, 30)), POLY2, 2, cap=10)


class TestObjectives:
    def test_singletons(self, rng):
        X = rng.standard_normal((2, 6))
        assert abs(trace_objective(kernel_matrix(X, POLY2), np.arange(6))) < 1e-12

    def test_single_cluster(self, rng):
        K = kernel_matrix(rng.standard_normal((3, 7)), RBF)
        expected = np.trace(K) - K.sum() / 7
        assert abs(trace_objective(K, np.zeros(7, dtype=int)) - expected) < 1e-12

    def test_trace_form_equals_embedding_cost(self, rng):
        X = rng.standard_normal((3, 9))
        K = kernel_matrix(X, POLY2)
        labels = np.array([0, 1, 2, 0, 1, 2, 0, 0, 1])
        assert abs(trace_objective(K, labels) - kmeans_cost(embedding(K), labels)) < 1e-8 * np.trace(K)

    def test_empty_cluster_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            trace_objective(np.eye(3), np.array([0, 0, 2]), 3)

    @given(labelings(), st.sampled_from([POLY2, RBF, KernelSpec.polynomial(3, 1.0)]), st.integers(0, 2**32 - 1))
    def test_sum_form_equals_trace_form(self, lab, spec, seed):
        labels, k = lab
        X = np.random.default_rng(seed).standard_normal((3, labels.size))
        K = kernel_matrix(X, spec)
        a, b = sum_form_objective(K, labels, k), trace_objective(K, labels, k)
        assert abs(a - b) <= 1e-8 * max(abs(b), np.trace(K) * 1e-8, 1e-300)


class TestIndicator:
    @given(labelings())
    def test_orthonormal_rows_and_projection(self, lab):
        labels, k = lab
        C = indicator_matrix(labels, k)
        np.testing.assert_allclose(C @ C.T, np.eye(k), atol=1e-15)
        P = np.eye(labels.size) - C.T @ C
        assert np.linalg.norm(P @ P - P) < 1e-10
        CtC = C.T @ C
        assert np.linalg.norm(CtC @ CtC - CtC) < 1e-10

    def test_entries(self):
        C = indicator_matrix(np.array([1, 0, 1, 1]))
        np.testing.assert_allclose(C, [[0, 1, 0, 0], [1 / np.sqrt(3), 0, 1 / np.sqrt(3), 1 / np.sqrt(3)]])


class TestBruteForce:
    def test_two_points(self):
        a = brute_force_optimal(np.array([[1.0, 0.2], [0.2, 1.0]]), 2)
        assert a.objective == pytest.approx(0.0, abs=1e-15)

    def test_tight_pairs(self):
        X = np.array([[0.0, 0.1, 10.0, 10.1], [0.0, 0.0, 0.0, 0.0]])
        a = brute_force_optimal(kernel_matrix(X, KernelSpec.polynomial(1)), 2)
        assert a.labels[0] == a.labels[1] != a.labels[2] == a.labels[3]

    @pytest.mark.parametrize("k", [2, 3])
    def test_beats_every_labeling(self, rng, k):
        K = kernel_matrix(rng.standard_normal((3, 8)), RBF)
        a = brute_force_optimal(K, k)
        values = [trace_objective(K, np.array(lab), k) for lab in itertools.product(range(k), repeat=8)
                  if len(set(lab)) == k]
        assert a.objective <= min(values) + 1e-12
        assert abs(a.objective - trace_objective(K, a.labels, k)) == 0.0

    def test_partition_count(self):
        # Stirling numbers of the second kind
        assert len(_partitions(8, 2)) == 127
        assert len(_partitions(10, 3)) == 9330

    @pytest.mark.parametrize("n,k", [(13, 2), (8, 4)])
    def test_bounds(self, n, k):
        with pytest.raises(ValueError):
            brute_force_optimal(np.eye(n), k)
