"""Kernel evaluation and on-the-fly generation of kernel-matrix column blocks.

Data matrices are stored column-per-sample: ``X`` has shape ``(p, n)``.
"""
from __future__ import annotations

import threading
from collections import Counter
from dataclasses import dataclass
from typing import Iterator

import numpy as np

DEFAULT_BLOCK_WIDTH = 256
DENSE_CAP = 20000


@dataclass(frozen=True)
class KernelSpec:
    """Polynomial ``(<x, y> + offset)^degree`` or Gaussian ``exp(-gamma |x - y|^2)``."""

    family: str = "polynomial"
    degree: int = 2
    offset: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.family not in ("polynomial", "rbf"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "polynomial":
            if int(self.degree) != self.degree or self.degree < 1:
                raise ValueError("polynomial degree must be a positive integer")
            if self.offset < 0:
                raise ValueError("polynomial offset must be nonnegative")
        elif not self.gamma > 0:
            raise ValueError("rbf bandwidth must be positive")

    @classmethod
    def polynomial(cls, degree: int = 2, offset: float = 0.0) -> "KernelSpec":
        return cls("polynomial", degree=degree, offset=offset)

    @classmethod
    def rbf(cls, gamma: float) -> "KernelSpec":
        return cls("rbf", gamma=gamma)

    @classmethod
    def parse(cls, text: str) -> "KernelSpec":
        """Parse ``poly:D[:GAMMA]`` or ``rbf:GAMMA``."""
        parts = text.split(":")
        try:
            if parts[0] == "poly" and len(parts) in (2, 3):
                offset = float(parts[2]) if len(parts) == 3 else 0.0
                return cls.polynomial(int(parts[1]), offset)
            if parts[0] == "rbf" and len(parts) == 2:
                return cls.rbf(float(parts[1]))
        except ValueError as exc:
            raise ValueError(f"bad kernel {text!r}: {exc}") from None
        raise ValueError(f"bad kernel {text!r}; expected poly:D[:GAMMA] or rbf:GAMMA")

    def __str__(self):
        if self.family == "polynomial":
            return f"poly:{self.degree}" + (f":{self.offset:g}" if self.offset else "")
        return f"rbf:{self.gamma:g}"


def as_data_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("data matrix must be 2-D (features x samples)")
    if not np.all(np.isfinite(X)):
        raise ValueError("data matrix has non-finite entries")
    return X


def kernel_entry(x, y, spec: KernelSpec) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.size} vs {y.size}")
    if spec.family == "polynomial":
        return float((np.dot(x, y) + spec.offset) ** spec.degree)
    d = x - y
    return float(np.exp(-spec.gamma * np.dot(d, d)))


def _gram(X: np.ndarray, Xc: np.ndarray) -> np.ndarray:
    # feature-by-feature accumulation: each entry sees the same operation
    # sequence whatever the block shape, so blocks agree bitwise
    G = np.multiply.outer(X[0], Xc[0])
    for k in range(1, X.shape[0]):
        G += np.multiply.outer(X[k], Xc[k])
    return G


def _apply(gram: np.ndarray, sq_rows, sq_cols, spec: KernelSpec) -> np.ndarray:
    if spec.family == "polynomial":
        if spec.offset:
            gram += spec.offset
        if spec.degree != 1:
            np.power(gram, spec.degree, out=gram)
        return gram
    # |x|^2 + |y|^2 - 2<x, y>, clamped at zero
    gram *= -2.0
    gram += sq_rows[:, None]
    gram += sq_cols[None, :]
    np.maximum(gram, 0.0, out=gram)
    gram *= -spec.gamma
    np.exp(gram, out=gram)
    return gram


def kernel_columns(X: np.ndarray, cols, spec: KernelSpec, sq_norms=None) -> np.ndarray:
    """Kernel matrix columns ``K[:, cols]`` (n x len(cols)) without forming K."""
    X = as_data_matrix(X)
    cols = np.asarray(cols, dtype=np.intp)
    n = X.shape[1]
    if cols.size and (cols.min() < 0 or cols.max() >= n):
        raise IndexError("column index out of range")
    Xc = X[:, cols]
    sq_rows = sq_cols = None
    if spec.family == "rbf":
        sq_rows = np.einsum("ij,ij->j", X, X) if sq_norms is None else sq_norms
        sq_cols = sq_rows[cols]
    return _apply(_gram(X, Xc), sq_rows, sq_cols, spec)


def kernel_column_block(X: np.ndarray, start: int, width: int, spec: KernelSpec, sq_norms=None) -> np.ndarray:
    """The n x width block ``K[:, start:start + width]``."""
    n = np.shape(X)[1]
    if start < 0 or width < 0 or start + width > n:
        raise IndexError(f"block [{start}, {start + width}) outside [0, {n})")
    return kernel_columns(X, np.arange(start, start + width), spec, sq_norms)


def kernel_matrix(X: np.ndarray, spec: KernelSpec, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense n x n kernel matrix; refuses when n exceeds ``cap``."""
    n = np.shape(X)[1]
    if n > cap:
        raise MemoryError(f"n={n} exceeds the dense kernel cap of {cap}")
    return kernel_column_block(X, 0, n, spec)


class KernelStream:
    """Generates column blocks of K in ascending order.

    ``generated`` counts how many times each column index was produced,
    which is how callers verify single-pass access.
    """

    def __init__(self, X, spec: KernelSpec, block_width: int = DEFAULT_BLOCK_WIDTH):
        if block_width < 1:
            raise ValueError("block width must be positive")
        self.X = as_data_matrix(X)
        self.spec = spec
        self.block_width = int(block_width)
        self.n = self.X.shape[1]
        self.generated: Counter = Counter()
        self._lock = threading.Lock()
        self._sq = np.einsum("ij,ij->j", self.X, self.X) if spec.family == "rbf" else None

    def starts(self) -> list[tuple[int, int]]:
        return [(s, min(self.block_width, self.n - s)) for s in range(0, self.n, self.block_width)]

    def block(self, start: int, width: int) -> np.ndarray:
        B = kernel_column_block(self.X, start, width, self.spec, self._sq)
        with self._lock:
            self.generated.update(range(start, start + width))
        return B

    def __iter__(self) -> Iterator[tuple[int, np.ndarray]]:
        for start, width in self.starts():
            yield start, self.block(start, width)
