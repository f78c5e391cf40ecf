import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from onepass_kkm.approx import exact_truncated
from onepass_kkm.kernel import KernelSpec, kernel_matrix
from onepass_kkm.metrics import clustering_accuracy, confusion_matrix, error_functionals

label_lists = st.lists(st.integers(0, 4), min_size=1, max_size=60)


def labels_from_confusion(M):
    pred, truth = [], []
    for i, j in itertools.product(range(M.shape[0]), range(M.shape[1])):
        pred += [i] * M[i, j]
        truth += [j] * M[i, j]
    return np.array(pred), np.array(truth)


class TestAccuracy:
    def test_identical(self):
        assert clustering_accuracy([0, 1, 1, 2], [0, 1, 1, 2]) == 1.0

    def test_renamed(self):
        assert clustering_accuracy([2, 0, 0, 1], [0, 1, 1, 2]) == 1.0

    def test_matches_permutation_search(self):
        M = np.array([[3, 0, 1], [0, 2, 2], [1, 1, 2]])
        pred, truth = labels_from_confusion(M)
        np.testing.assert_array_equal(confusion_matrix(pred, truth), M)
        best = max(sum(M[i, p[i]] for i in range(3)) for p in itertools.permutations(range(3)))
        assert clustering_accuracy(pred, truth) == best / M.sum()

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            clustering_accuracy([0, 1], [0, 1, 1])

    def test_constant_prediction_gives_largest_class_share(self):
        truth = np.repeat([0, 1, 2], [5, 3, 2])
        assert clustering_accuracy(np.zeros(10, dtype=int), truth) == 0.5
        balanced = np.repeat([0, 1, 2, 3], 5)
        assert clustering_accuracy(np.zeros(20, dtype=int), balanced) == 0.25

    @given(st.data())
    def test_relabeling_invariance(self, data):
        truth = np.array(data.draw(label_lists))
        pred = np.array(data.draw(st.lists(st.integers(0, 4), min_size=truth.size, max_size=truth.size)))
        p1 = np.array(data.draw(st.permutations(range(5))))
        p2 = np.array(data.draw(st.permutations(range(5))))
        a = clustering_accuracy(pred, truth)
        assert clustering_accuracy(p1[pred], truth) == a
        assert clustering_accuracy(pred, p2[truth]) == a
        assert 0.0 < a <= 1.0


class TestErrorFunctionals:
    def test_zero(self, rng):
        K = kernel_matrix(rng.standard_normal((2, 5)), KernelSpec.polynomial(2))
        assert error_functionals(K, K) == (0.0, 0.0, 0.0, 0.0)

    def test_diagonal(self):
        ef = error_functionals(np.diag([1.0, 2.0, 3.0]), np.zeros((3, 3)))
        assert ef.trace_norm == pytest.approx(6.0, abs=1e-12)
        assert ef.trace == 6.0
        assert ef.spectral == pytest.approx(3.0, abs=1e-12)
        assert ef.frobenius == pytest.approx(np.sqrt(14.0), abs=1e-12)

    def test_exact_truncation_tail(self, rng):
        X = rng.standard_normal((5, 12))
        spec = KernelSpec.polynomial(2)
        K = kernel_matrix(X, spec)
        f = exact_truncated(X, spec, 3)
        lam = np.sort(np.linalg.eigvalsh(K))[::-1]
        ef = error_functionals(K, f.gram())
        tail = lam[3:].sum()
        assert abs(ef.trace_norm - tail) < 1e-10 * lam[0]
        assert abs(ef.trace - tail) < 1e-10 * lam[0]

    def test_cap(self):
        with pytest.raises(MemoryError):
            error_functionals(np.eye(4), np.eye(4), cap=3)

    @given(st.integers(1, 10), st.integers(0, 2**32 - 1))
    def test_norm_ordering(self, n, seed):
        g = np.random.default_rng(seed)
        A, B = g.standard_normal((n, n)), g.standard_normal((n, n))
        ef = error_functionals(A + A.T, B + B.T)
        tol = 1e-12 * max(ef.trace_norm, 1.0)
        assert ef.spectral <= ef.frobenius + tol
        assert ef.frobenius <= ef.trace_norm + tol
