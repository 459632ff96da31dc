"""Datasets and model indices.

A model is represented as a sorted tuple of distinct column indices; the empty
tuple is the null model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Tuple

import numpy as np

from .errors import ZeroVarianceColumn

ModelIndex = Tuple[int, ...]

STANDARDIZE_TOL = 1e-10


def make_model(indices: Iterable[int], p: int | None = None) -> ModelIndex:
    """Return the canonical (sorted, duplicate-free) model for ``indices``.

    Raises ``ValueError`` on duplicates or on indices outside ``[0, p)``.
    """
    idx = [int(i) for i in indices]
    model = tuple(sorted(set(idx)))
    if len(model) != len(idx):
        raise ValueError(f"duplicate indices in model {idx}")
    if model and model[0] < 0:
        raise ValueError(f"negative index in model {idx}")
    if p is not None and model and model[-1] >= p:
        raise ValueError(f"index {model[-1]} out of range for p={p}")
    return model


def is_model(model, p: int) -> bool:
    return (
        isinstance(model, tuple)
        and all(isinstance(i, int) for i in model)
        and all(a < b for a, b in zip(model, model[1:]))
        and (not model or (model[0] >= 0 and model[-1] < p))
    )


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``x`` (n x p) and response ``y`` (n,).

    ``standardized`` records whether the columns of ``x`` have been centred and
    scaled to unit sample standard deviation and ``y`` centred.
    """

    x: np.ndarray
    y: np.ndarray
    standardized: bool = False
    columns: Tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=float)
        y = np.ascontiguousarray(self.y, dtype=float).ravel()
        if x.ndim != 2:
            raise ValueError("x must be two-dimensional")
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"x has {x.shape[0]} rows but y has {y.shape[0]}")
        if x.shape[0] < 2 or x.shape[1] < 1:
            raise ValueError("need n >= 2 and p >= 1")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("x and y must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if not self.columns:
            object.__setattr__(self, "columns", tuple(f"x{j}" for j in range(x.shape[1])))
        elif len(self.columns) != x.shape[1]:
            raise ValueError("columns must name every column of x")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def check_standardized(self, tol: float = STANDARDIZE_TOL) -> bool:
        means = self.x.mean(axis=0)
        sds = self.x.std(axis=0, ddof=1)
        return bool(
            np.all(np.abs(means) <= tol)
            and np.all(np.abs(sds - 1.0) <= tol)
            and abs(self.y.mean()) <= tol
        )

    def standardize(self) -> "Dataset":
        """Centre and scale columns, centre the response.

        Raises ``ZeroVarianceColumn`` naming every constant column.
        """
        sds = self.x.std(axis=0, ddof=1)
        bad = [self.columns[j] for j in np.flatnonzero(~(sds > 0))]
        if bad:
            raise ZeroVarianceColumn(bad)
        x = (self.x - self.x.mean(axis=0)) / sds
        y = self.y - self.y.mean()
        return Dataset(x, y, standardized=True, columns=self.columns)

    def subset_rows(self, rows) -> "Dataset":
        """Row subset; keeps the standardization flag of the parent."""
        rows = np.asarray(rows)
        return Dataset(self.x[rows], self.y[rows], standardized=self.standardized,
                       columns=self.columns)


def train_test_split(dataset: Dataset, test_fraction: float, seed: int):
    """Deterministic seeded shuffle; ``test_fraction`` of rows go to the test set."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(dataset.n)
    n_test = max(1, int(round(test_fraction * dataset.n)))
    if dataset.n - n_test < 2:
        raise ValueError("holdout leaves fewer than two training rows")
    test, train = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    return dataset.subset_rows(train), dataset.subset_rows(test)
