"""Dense linear-algebra primitives used by the sketching routines."""
from __future__ import annotations

import warnings

import numpy as np

__all__ = [
    "RankDeficiencyWarning",
    "IllConditionedError",
    "is_power_of_two",
    "next_power_of_two",
    "fwht",
    "hadamard_entries",
    "orthonormal_basis",
    "range_basis",
    "solve_small",
    "sym_eig",
]

MAX_CONDITION = 1e12


class RankDeficiencyWarning(UserWarning):
    """Raised (as a warning) when a matrix has lower numerical rank than requested."""


class IllConditionedError(np.linalg.LinAlgError):
    def __init__(self, condition: float):
        super().__init__(f"system is numerically rank deficient (condition number {condition:.3e})")
        self.condition = condition


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    if n < 1:
        raise ValueError("n must be positive")
    return 1 << (n - 1).bit_length()


def fwht(a, *, inplace: bool = False) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform along the first axis.

    Computes ``H @ a`` for the Sylvester-ordered +/-1 Hadamard matrix of
    order ``a.shape[0]`` with the in-place butterfly, O(N log N) per column.
    Columns of a 2-D input are transformed independently and each column sees
    the same sequence of floating point operations, so the result for a
    column does not depend on which other columns are batched with it.
    """
    if inplace:
        if not isinstance(a, np.ndarray) or a.dtype != np.float64 or not a.flags.c_contiguous:
            raise TypeError("inplace transform needs a C-contiguous float64 ndarray")
        out = a
    else:
        out = np.array(a, dtype=np.float64, copy=True, order="C")
    if out.ndim not in (1, 2):
        raise ValueError("fwht expects a vector or a matrix")
    n = out.shape[0]
    if not is_power_of_two(n):
        raise ValueError(f"length {n} is not a power of two")
    cols = out.reshape(n, -1)
    m = cols.shape[1]
    h = 1
    while h < n:
        view = cols.reshape(n // (2 * h), 2, h, m)
        top = view[:, 0].copy()
        view[:, 0] += view[:, 1]
        np.subtract(top, view[:, 1], out=view[:, 1])
        h *= 2
    return out


def hadamard_entries(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Entries H[rows[:, None], cols[None, :]] of the Sylvester Hadamard matrix.

    Uses H[i, k] = (-1)^popcount(i & k), so arbitrary sub-blocks are formed
    without building H.
    """
    rows = np.asarray(rows, dtype=np.uint64)
    cols = np.asarray(cols, dtype=np.uint64)
    parity = np.bitwise_count(rows[:, None] & cols[None, :]) & 1
    return 1.0 - 2.0 * parity.astype(np.float64)


def _numerical_rank(s: np.ndarray, shape) -> int:
    tol = max(shape) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
    return int(np.count_nonzero(s > tol))


def range_basis(W: np.ndarray) -> np.ndarray:
    """Orthonormal basis for the numerical range of W (left singular vectors above rank tolerance)."""
    W = np.asarray(W, dtype=np.float64)
    U, s, _ = np.linalg.svd(W, full_matrices=False)
    return U[:, :max(_numerical_rank(s, W.shape), 1)].copy()


def orthonormal_basis(W: np.ndarray, r: int) -> np.ndarray:
    """The r leading left singular vectors of W (an N x r' matrix).

    If W has numerical rank below r the trailing columns still come out
    orthonormal (they complete the basis) and a RankDeficiencyWarning is
    issued carrying the effective rank.
    """
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise ValueError("W must be a matrix")
    N, rp = W.shape
    if not 1 <= r <= rp <= N:
        raise ValueError(f"need 1 <= r <= r' <= N, got r={r}, r'={rp}, N={N}")
    U, s, _ = np.linalg.svd(W, full_matrices=False)
    effective = _numerical_rank(s, W.shape)
    if effective < r:
        warnings.warn(
            f"sketch has effective rank {effective} < requested rank {r}; "
            "basis completed with arbitrary orthonormal directions",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    return U[:, :r].copy()


def solve_small(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Least-squares B with B @ M ~= rhs, returned symmetrized.

    M and rhs are r x r'. Raises IllConditionedError when cond(M) > 1e12.
    """
    M = np.asarray(M, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if M.shape != rhs.shape or M.ndim != 2:
        raise ValueError("M and rhs must be matrices of the same shape")
    r, rp = M.shape
    if rp < r:
        raise ValueError("M must have at least as many columns as rows")
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise IllConditionedError(float(cond))
    # B M = rhs  <=>  M^T B^T = rhs^T
    Bt, *_ = np.linalg.lstsq(M.T, rhs.T, rcond=None)
    B = Bt.T
    return 0.5 * (B + B.T)


def sym_eig(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix, eigenvalues descending."""
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError("B must be square")
    w, V = np.linalg.eigh(B)
    return w[::-1].copy(), V[:, ::-1].copy()
