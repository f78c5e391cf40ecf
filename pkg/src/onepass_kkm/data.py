"""Synthetic rings, CSV ingestion, and per-sample normalization."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .approx import rng_for

_RINGS_STREAM = 200


class DataError(ValueError):
    """Malformed input data."""


@dataclass(frozen=True)
class LabeledDataset:
    data: np.ndarray  # p x n, one sample per column
    truth: np.ndarray | None
    name: str = ""
    class_names: tuple = ()

    def __post_init__(self):
        if self.truth is not None:
            if len(self.truth) != self.data.shape[1]:
                raise DataError("label count does not match sample count")
            counts = np.bincount(self.truth)
            if np.any(counts == 0):
                raise DataError("every class must be non-empty")

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def p(self) -> int:
        return self.data.shape[0]

    @property
    def n_classes(self) -> int | None:
        return None if self.truth is None else int(self.truth.max()) + 1


def generate_rings(n: int = 4000, radii=(1.0, 4.5), noise_sigma: float = 0.1, seed: int = 0) -> LabeledDataset:
    """Two concentric rings in the plane, n/2 samples each.

    Angles are uniform on [0, 2 pi); each radius is the ring radius plus
    Gaussian noise. Labels are 0 for the inner ring and 1 for the outer.
    """
    r1, r2 = map(float, radii)
    if n < 2 or n % 2:
        raise ValueError("n must be a positive even number")
    if not 0 < r1 < r2:
        raise ValueError("radii must satisfy 0 < r1 < r2")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    rng = rng_for(seed, _RINGS_STREAM)
    half = n // 2
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    radius = np.repeat([r1, r2], half)
    if noise_sigma > 0:
        radius = radius + rng.normal(0.0, noise_sigma, size=n)
    X = np.vstack([radius * np.cos(theta), radius * np.sin(theta)])
    truth = np.repeat([0, 1], half)
    return LabeledDataset(X, truth, name=f"rings:{n}", class_names=("inner", "outer"))


def load_csv(path, label_column: int | None = None, skip_rows: int = 0) -> LabeledDataset:
    """Read a comma-separated file of numeric features.

    Blank lines are ignored. The optional label column may hold any
    strings; classes are numbered in order of first appearance.
    """
    path = Path(path)
    features: list[list[float]] = []
    raw_labels: list[str] = []
    arity = None
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if lineno <= skip_rows or not row or all(not c.strip() for c in row):
                continue
            if arity is None:
                arity = len(row)
                if label_column is not None and not -arity <= label_column < arity:
                    raise DataError(f"label column {label_column} out of range for {arity} columns")
            elif len(row) != arity:
                raise DataError(f"row {lineno}: expected {arity} columns, found {len(row)}")
            lab = label_column % arity if label_column is not None else None
            values = []
            for col, cell in enumerate(row):
                if col == lab:
                    raw_labels.append(cell.strip())
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataError(f"row {lineno}, column {col}: non-numeric value {cell!r}") from None
            features.append(values)
    if not features:
        raise DataError(f"{path}: no data rows")
    X = np.array(features, dtype=np.float64).T
    if not np.all(np.isfinite(X)):
        raise DataError(f"{path}: non-finite feature values")
    truth = None
    names: tuple = ()
    if label_column is not None:
        names = tuple(dict.fromkeys(raw_labels))
        index = {name: i for i, name in enumerate(names)}
        truth = np.array([index[v] for v in raw_labels], dtype=np.intp)
    return LabeledDataset(X, truth, name=path.stem, class_names=names)


def write_csv(path, dataset: LabeledDataset) -> None:
    """Inverse of :func:`load_csv` with the label, if any, in the last column."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for j in range(dataset.n):
            row = [repr(float(v)) for v in dataset.data[:, j]]
            if dataset.truth is not None:
                row.append(str(int(dataset.truth[j])))
            writer.writerow(row)


def normalize_rows_unit_l2(X) -> np.ndarray:
    """Scale every sample (column) to unit Euclidean norm; zero samples stay zero."""
    X = np.asarray(X, dtype=np.float64)
    norms = np.sqrt(np.einsum("ij,ij->j", X, X))
    zero = norms == 0
    if np.any(zero):
        warnings.warn(f"{int(zero.sum())} zero sample(s) left unnormalized", RuntimeWarning, stacklevel=2)
    return X / np.where(zero, 1.0, norms)[None, :]
