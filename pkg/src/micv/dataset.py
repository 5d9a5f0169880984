"""Incomplete-data containers shared by imputation, cross-validation and metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CONTINUOUS = "continuous"
BINARY = "binary"
KINDS = (CONTINUOUS, BINARY)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Predictor matrix with an observation mask plus a binary outcome.

    Unobserved predictor cells are stored as NaN so that nothing can read
    them by accident; every array is copied on construction and made
    read-only. ``outcome_mask`` false means the outcome exists but must not
    be looked at (validation folds), so masked rows keep their stored value.
    """

    columns: tuple[tuple[str, str], ...]
    predictors: np.ndarray
    predictor_mask: np.ndarray
    outcome: np.ndarray
    outcome_mask: np.ndarray
    outcome_name: str = "y"

    def __post_init__(self):
        columns = tuple((str(name), str(kind)) for name, kind in self.columns)
        X = np.array(self.predictors, dtype=float, copy=True)
        mask = np.array(self.predictor_mask, dtype=bool, copy=True)
        y = np.array(self.outcome, copy=True)
        ymask = np.array(self.outcome_mask, dtype=bool, copy=True)

        if X.ndim != 2:
            raise ValueError("predictors must be a 2-D matrix")
        n, p = X.shape
        if mask.shape != (n, p):
            raise ValueError(f"predictor_mask shape {mask.shape} != predictors shape {(n, p)}")
        if len(columns) != p:
            raise ValueError(f"{len(columns)} column descriptors for {p} predictor columns")
        if y.shape != (n,) or ymask.shape != (n,):
            raise ValueError("outcome and outcome_mask must have one entry per row")
        for name, kind in columns:
            if kind not in KINDS:
                raise ValueError(f"column {name!r}: unknown kind {kind!r}")

        if not np.all(np.isin(y, (0, 1))):
            raise ValueError("outcome entries must be 0 or 1")
        y = y.astype(np.int8)
        X[~mask] = np.nan
        if not np.all(np.isfinite(X[mask])):
            raise ValueError("observed predictor cells must be finite")

        observed_per_col = mask.sum(axis=0)
        for j, (name, kind) in enumerate(columns):
            if observed_per_col[j] == 0:
                raise ValueError(f"column {name!r} has no observed cells")
            if kind == BINARY and not np.all(np.isin(X[mask[:, j], j], (0.0, 1.0))):
                raise ValueError(f"binary column {name!r} has observed values outside {{0, 1}}")
        seen = y[ymask]
        if not (np.any(seen == 0) and np.any(seen == 1)):
            raise ValueError("observed outcomes must include both classes")

        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "predictors", _frozen(X))
        object.__setattr__(self, "predictor_mask", _frozen(mask))
        object.__setattr__(self, "outcome", _frozen(y))
        object.__setattr__(self, "outcome_mask", _frozen(ymask))

    @property
    def n(self) -> int:
        return self.predictors.shape[0]

    @property
    def p(self) -> int:
        return self.predictors.shape[1]

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.columns]

    @property
    def binary_columns(self) -> np.ndarray:
        return np.array([kind == BINARY for _, kind in self.columns], dtype=bool)

    @property
    def incomplete_rows(self) -> np.ndarray:
        """Boolean per row: true when any predictor cell is unobserved."""
        return ~self.predictor_mask.all(axis=1)

    def with_outcome_mask(self, outcome_mask) -> Dataset:
        return Dataset(
            self.columns,
            self.predictors,
            self.predictor_mask,
            self.outcome,
            outcome_mask,
            self.outcome_name,
        )

    @classmethod
    def from_arrays(cls, X, y, *, kinds=None, names=None, outcome_mask=None, outcome_name="y"):
        """Build from a matrix using NaN for missing cells.

        Kinds default to binary for columns whose observed support is within
        {0, 1}, continuous otherwise.
        """
        X = np.asarray(X, dtype=float)
        mask = ~np.isnan(X)
        p = X.shape[1]
        if names is None:
            names = [f"x{j + 1}" for j in range(p)]
        if kinds is None:
            kinds = [infer_kind(X[mask[:, j], j]) for j in range(p)]
        if outcome_mask is None:
            outcome_mask = np.ones(len(y), dtype=bool)
        return cls(tuple(zip(names, kinds)), X, mask, y, outcome_mask, outcome_name)


def infer_kind(observed: np.ndarray) -> str:
    return BINARY if np.all(np.isin(observed, (0.0, 1.0))) else CONTINUOUS


@dataclass(frozen=True, eq=False)
class ImputedDataset:
    """A completed copy of a :class:`Dataset`.

    ``working_outcome`` carries the chain's current outcome values (masked
    rows filled in) between sweeps; it is dropped once imputation finishes.
    """

    predictors: np.ndarray
    source: Dataset = field(repr=False)
    working_outcome: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.predictors, dtype=float)
        if X.shape != self.source.predictors.shape:
            raise ValueError("completed matrix does not match its source dataset")
        if not np.all(np.isfinite(X)):
            raise ValueError("completed matrix still has missing cells")
