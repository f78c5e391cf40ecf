"""Low-rank linearizations ``K ~= Y^T Y`` of a kernel matrix.

Three routes are provided: the one-pass randomized eigendecomposition
(structured SRHT test matrix, or a Gaussian one for reference), uniform
Nyström sampling, and the exact truncated eigendecomposition.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .kernel import (
    DEFAULT_BLOCK_WIDTH,
    DENSE_CAP,
    KernelSpec,
    KernelStream,
    as_data_matrix,
    kernel_columns,
    kernel_matrix,
)
from .linalg import (
    RankDeficiencyWarning,
    fwht,
    hadamard_entries,
    next_power_of_two,
    orthonormal_basis,
    range_basis,
    solve_small,
    sym_eig,
)

METHODS = ("one_pass_srht", "one_pass_gaussian", "nystrom", "exact")

# stream ids for counter-based seeding
_SIGNS, _ROWS, _GAUSS, _NYSTROM = 1, 2, 3, 4
# rows per independently seeded chunk of the Gaussian test matrix
GAUSS_CHUNK = 256


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator keyed by (seed, stream...)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


def derive_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SketchConfig:
    rank: int
    oversampling: int = 10
    seed: int = 0
    block_width: int = DEFAULT_BLOCK_WIDTH
    method: str = "one_pass_srht"
    samples: int | None = None  # nystrom column count m
    basis: str = "full"  # one-pass only: "full" range of W, or its "leading" r directions

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.rank < 1:
            raise ValueError("rank must be at least 1")
        if self.oversampling < 0:
            raise ValueError("oversampling must be nonnegative")
        if self.block_width < 1:
            raise ValueError("block width must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.basis not in ("full", "leading"):
            raise ValueError(f"unknown basis mode {self.basis!r}")
        if self.method == "nystrom" and (self.samples is None or self.samples < self.rank):
            raise ValueError("nystrom needs samples m >= rank")

    @property
    def sketch_size(self) -> int:
        return self.rank + self.oversampling

    def check(self, n: int):
        if self.method in ("one_pass_srht", "one_pass_gaussian") and self.sketch_size > n:
            raise ValueError(f"r' = r + l = {self.sketch_size} exceeds n = {n}")
        if self.method == "nystrom" and self.samples > n:
            raise ValueError(f"m = {self.samples} exceeds n = {n}")
        if self.rank > n:
            raise ValueError(f"rank {self.rank} exceeds n = {n}")


@dataclass(frozen=True)
class LowRankFactor:
    """Embedding ``Y`` (r x n) with ``Y^T Y`` approximating K.

    Rows are ordered by descending eigenvalue of ``Y^T Y`` and each row's
    largest-magnitude entry is positive, which pins down the sign ambiguity.
    """

    Y: np.ndarray
    eigenvalues: np.ndarray
    basis: np.ndarray | None = None
    method: str = ""
    effective_rank: int | None = None
    memory: dict = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return self.Y.shape[0]

    def gram(self) -> np.ndarray:
        return self.Y.T @ self.Y


def _canonical_signs(Y: np.ndarray, *others: np.ndarray) -> None:
    for i, row in enumerate(Y):
        if row.size and row[np.argmax(np.abs(row))] < 0:
            row *= -1
            for M in others:
                M[:, i] *= -1


def srht_draws(n: int, sketch_size: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Random signs over the padded dimension and the sorted sampled columns."""
    N = next_power_of_two(n)
    signs = rng_for(seed, _SIGNS).choice(np.array([-1.0, 1.0]), size=N)
    idx = np.sort(rng_for(seed, _ROWS).choice(N, size=sketch_size, replace=False))
    return signs, idx


def srht_omega(n: int, signs: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """First n rows of D H R (n x r'), with H the unnormalized Hadamard matrix of the padded order."""
    omega = hadamard_entries(np.arange(n), idx)
    omega *= signs[:n, None]
    return omega


def gaussian_rows(n: int, sketch_size: int, seed: int, chunk: int) -> np.ndarray:
    """Rows ``[chunk * GAUSS_CHUNK, ...)`` of the n x r' Gaussian test matrix, drawn on demand."""
    start = chunk * GAUSS_CHUNK
    return rng_for(seed, _GAUSS, chunk).standard_normal((min(GAUSS_CHUNK, n - start), sketch_size))


def gaussian_omega(n: int, sketch_size: int, seed: int) -> np.ndarray:
    return np.vstack([gaussian_rows(n, sketch_size, seed, c) for c in range(-(-n // GAUSS_CHUNK))])


def _range_basis(W: np.ndarray, rank: int, mode: str) -> tuple[np.ndarray, np.ndarray]:
    """Q spanning the range of W, and Q^T W.

    ``leading`` keeps the r leading left singular vectors; ``full`` keeps
    every direction above the rank tolerance and defers truncation to the
    eigendecomposition of B.
    """
    if mode == "leading":
        Q = orthonormal_basis(W, rank)
    else:
        Q = range_basis(W)
        if Q.shape[1] < rank:
            warnings.warn(f"sketch has effective rank {Q.shape[1]} < requested rank {rank}",
                          RankDeficiencyWarning, stacklevel=3)
    return Q, Q.T @ W


def _factor(Q: np.ndarray, QtOmega: np.ndarray, QtW: np.ndarray, rank: int, method: str,
            memory: dict) -> LowRankFactor:
    B = solve_small(QtOmega, QtW)
    lam, V = sym_eig(B)
    lam = np.maximum(lam[:rank], 0.0)
    V = V[:, :rank]
    k = lam.size
    Y = np.zeros((rank, Q.shape[0]))
    Y[:k] = np.sqrt(lam)[:, None] * (V.T @ Q.T)
    basis = np.zeros((Q.shape[0], rank))
    basis[:, :k] = Q @ V
    eigenvalues = np.zeros(rank)
    eigenvalues[:k] = lam
    _canonical_signs(Y, basis)
    return LowRankFactor(Y=Y, eigenvalues=eigenvalues, basis=basis, method=method,
                         effective_rank=int(np.count_nonzero(eigenvalues > 0)), memory=memory)


def factor_from_sketch(W: np.ndarray, omega: np.ndarray, rank: int, basis: str = "full",
                       method: str = "") -> LowRankFactor:
    """Steps after the pass: basis of W, solve for B, eigendecompose, embed.

    ``W = K @ omega`` must already be formed (n x r').
    """
    Q, QtW = _range_basis(np.asarray(W, dtype=np.float64), rank, basis)
    return _factor(Q, Q.T @ omega, QtW, rank, method, {})


def one_pass_sketch(X, spec: KernelSpec, cfg: SketchConfig, *, stream: KernelStream | None = None,
                    threads: int = 1) -> LowRankFactor:
    """Single-pass randomized eigendecomposition of the kernel matrix.

    Each column block of K is generated once, sign-flipped, Hadamard
    transformed and subsampled into W^T (or, for the Gaussian variant,
    multiplied by Omega regenerated chunk by chunk), so only W and one
    block are held during the pass. B is then recovered from ``B (Q^T Omega) = Q^T W``
    without touching K again.

    ``factor.memory`` reports the peak bytes of live sketch buffers and of
    in-flight column blocks.
    """
    if cfg.method not in ("one_pass_srht", "one_pass_gaussian"):
        raise ValueError(f"one_pass_sketch does not run method {cfg.method!r}")
    if stream is None:
        stream = KernelStream(X, spec, cfg.block_width)
    n = stream.n
    cfg.check(n)
    rp = cfg.sketch_size
    N = next_power_of_two(n)
    item = np.dtype(np.float64).itemsize

    Wt = np.empty((rp, n))
    if cfg.method == "one_pass_srht":
        signs, idx = srht_draws(n, rp, cfg.seed)
        # kernel block, padded copy, and the half-height butterfly scratch
        block_bytes = (n + N + N // 2) * stream.block_width * item

        def work(start, width):
            buf = np.zeros((N, width))
            buf[:n] = stream.block(start, width)
            buf[:n] *= signs[:n, None]
            fwht(buf, inplace=True)
            Wt[:, start:start + width] = buf[idx]
    else:
        chunks = -(-n // GAUSS_CHUNK)
        # kernel block, its slice of W^T, and one chunk of Omega
        block_bytes = (n * stream.block_width + rp * stream.block_width + GAUSS_CHUNK * rp) * item

        def work(start, width):
            # K symmetric: rows [start, start+width) of K Omega, with Omega regenerated chunk by chunk
            block = stream.block(start, width)
            acc = np.zeros((rp, width))
            for c in range(chunks):
                s = c * GAUSS_CHUNK
                acc += gaussian_rows(n, rp, cfg.seed, c).T @ block[s:s + GAUSS_CHUNK]
            Wt[:, start:start + width] = acc

    blocks = stream.starts()
    # every block writes a disjoint slice of W^T, so thread count cannot change the result
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda sw: work(*sw), blocks))
        live_blocks = min(threads, len(blocks))
    else:
        for start, width in blocks:
            work(start, width)
        live_blocks = 1

    Q, QtW = _range_basis(Wt.T, cfg.rank, cfg.basis)
    # SVD stage: W^T, the n x r' singular vectors and the retained basis Q
    peak = 2 * Wt.nbytes + Q.nbytes
    del Wt
    if cfg.method == "one_pass_srht":
        omega = srht_omega(n, signs, idx)
    else:
        omega = gaussian_omega(n, rp, cfg.seed)
    peak = max(peak, Q.nbytes + omega.nbytes)
    QtOmega = Q.T @ omega
    del omega
    memory = {"sketch_bytes": peak, "block_bytes": block_bytes * live_blocks}
    memory["peak_bytes"] = memory["sketch_bytes"] + memory["block_bytes"]
    return _factor(Q, QtOmega, QtW, cfg.rank, cfg.method, memory)


def _diagonalize(Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # rotate rows so that Y Y^T is diagonal; Y^T Y is unchanged
    lam, V = sym_eig(Y @ Y.T)
    Y = V.T @ Y
    return Y, np.maximum(lam, 0.0)


def nystrom(X, spec: KernelSpec, m: int, r: int, seed: int = 0, *, pinv_tol: float = 1e-10) -> LowRankFactor:
    """Rank-r Nyström approximation from m columns sampled uniformly without replacement.

    ``Y^T Y = C W_r^+ C^T`` where C holds the sampled columns and W_r is the
    rank-r truncation of their m x m intersection block.
    """
    X = as_data_matrix(X)
    n = X.shape[1]
    if not 1 <= r <= m <= n:
        raise ValueError(f"need 1 <= r <= m <= n, got r={r}, m={m}, n={n}")
    idx = np.sort(rng_for(seed, _NYSTROM).choice(n, size=m, replace=False))
    C = kernel_columns(X, idx, spec)
    Wm = C[idx]
    Wm = 0.5 * (Wm + Wm.T)
    lam, U = sym_eig(Wm)
    keep = lam[:r] > pinv_tol * max(lam[0], 0.0)
    effective = int(np.count_nonzero(keep))
    if effective < r:
        warnings.warn(f"Nystrom intersection block has effective rank {effective} < {r}",
                      RankDeficiencyWarning, stacklevel=2)
    Y = np.zeros((r, n))
    if effective:
        Y[:effective] = (C @ (U[:, :effective] / np.sqrt(lam[:effective]))).T
    Y, ev = _diagonalize(Y)
    _canonical_signs(Y)
    memory = {"sketch_bytes": C.nbytes + Wm.nbytes + Y.nbytes, "block_bytes": 0}
    memory["peak_bytes"] = memory["sketch_bytes"]
    return LowRankFactor(Y=Y, eigenvalues=ev, basis=None, method="nystrom", effective_rank=effective, memory=memory)


def exact_truncated(X, spec: KernelSpec, r: int, *, cap: int = DENSE_CAP) -> LowRankFactor:
    """Best rank-r approximation from the full eigendecomposition of K."""
    K = kernel_matrix(X, spec, cap=cap)
    n = K.shape[0]
    if not 1 <= r <= n:
        raise ValueError(f"rank must be in [1, {n}]")
    lam, U = scipy.linalg.eigh(K, subset_by_index=[n - r, n - 1])
    lam, U = np.maximum(lam[::-1], 0.0), U[:, ::-1].copy()
    Y = np.sqrt(lam)[:, None] * U.T
    _canonical_signs(Y, U)
    memory = {"sketch_bytes": K.nbytes + U.nbytes, "block_bytes": 0}
    memory["peak_bytes"] = memory["sketch_bytes"]
    return LowRankFactor(Y=Y, eigenvalues=lam, basis=U, method="exact",
                         effective_rank=int(np.count_nonzero(lam > 0)), memory=memory)


def approx_error(X, spec: KernelSpec, factor: LowRankFactor, block_width: int = DEFAULT_BLOCK_WIDTH) -> float:
    """Normalized error ``|K - Y^T Y|_F / |K|_F`` streamed over column blocks."""
    Y = factor.Y if isinstance(factor, LowRankFactor) else np.asarray(factor)
    err = total = 0.0
    for start, block in KernelStream(X, spec, block_width):
        total += np.einsum("ij,ij->", block, block)
        block -= Y.T @ Y[:, start:start + block.shape[1]]
        err += np.einsum("ij,ij->", block, block)
    if total == 0.0:
        return 0.0 if err == 0.0 else float("inf")
    return float(np.sqrt(err / total))


def linearize(X, spec: KernelSpec, cfg: SketchConfig, *, threads: int = 1) -> LowRankFactor:
    """Dispatch on ``cfg.method``."""
    n = np.shape(X)[1]
    cfg.check(n)
    if cfg.method in ("one_pass_srht", "one_pass_gaussian"):
        return one_pass_sketch(X, spec, cfg, threads=threads)
    if cfg.method == "nystrom":
        return nystrom(X, spec, cfg.samples, cfg.rank, cfg.seed)
    return exact_truncated(X, spec, cfg.rank)
