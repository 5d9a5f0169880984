"""Accuracy and replicate-spread summaries of final predicted probabilities."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dataset import Dataset

# patients whose mean prediction falls outside this band are dropped from the spread pool
SPREAD_BAND = (0.2, 0.8)
STRATA = ("full", "missing", "complete")


def brier_score(predictions, outcomes) -> float:
    """Mean squared difference between predicted probability and 0/1 outcome."""
    p = np.asarray(predictions, dtype=float)
    y = np.asarray(outcomes, dtype=float)
    if p.shape != y.shape or p.ndim != 1:
        raise ValueError(f"length mismatch: {p.shape} vs {y.shape}")
    if p.size == 0:
        raise ValueError("brier score of an empty set")
    return float(np.mean((p - y) ** 2))


@dataclass(frozen=True, eq=False)
class ReplicateMatrix:
    """``n x R`` final predictions, one column per replicate analysis."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] < 1:
            raise ValueError("replicate matrix must be n x R with R >= 1")
        if not np.all((v > 0.0) & (v < 1.0)):
            raise ValueError("replicate predictions must lie strictly inside (0, 1)")
        object.__setattr__(self, "values", v)

    @property
    def replicate_count(self) -> int:
        return self.values.shape[1]


class Spread(NamedTuple):
    """R value and how many patients survived the band filter.

    ``retained == 0`` flags an empty pool, in which case ``value`` is 0.
    """

    value: float
    retained: int

    @property
    def empty(self) -> bool:
        return self.retained == 0


def spread_measure_R(replicates: ReplicateMatrix, subset=None) -> Spread:
    """Imputation-induced spread of predictions, in percentage points.

    For each patient in ``subset`` the deviations of the replicate
    predictions from their mean are pooled, provided the mean lies in the
    closed band [0.2, 0.8]; the result is the 90th minus the 10th
    percentile of the pool (linear interpolation), times 100.
    """
    V = replicates.values
    if V.shape[1] < 2:
        raise ValueError("spread needs at least two replicates")
    rows = np.arange(V.shape[0]) if subset is None else np.asarray(subset, dtype=int).reshape(-1)
    if rows.size == 0:
        raise ValueError("empty subset")
    sub = V[rows]
    mean = sub.mean(axis=1)
    keep = (mean >= SPREAD_BAND[0]) & (mean <= SPREAD_BAND[1])
    if not keep.any():
        return Spread(0.0, 0)
    dev = (sub[keep] - mean[keep, None]).ravel()
    q90, q10 = np.percentile(dev, [90, 10], method="linear")
    return Spread(float((q90 - q10) * 100.0), int(keep.sum()))


def stratify(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Row indices of (records with any missing predictor, complete records)."""
    incomplete = dataset.incomplete_rows
    return np.flatnonzero(incomplete), np.flatnonzero(~incomplete)


@dataclass(frozen=True)
class MetricsReport:
    """Averaged Brier scores per stratum and per-stratum R values.

    R fields are ``None`` when undefined (a single replicate, or an empty
    stratum); ``r_*_retained`` is 0 when the band filter removed everyone.
    Brier of an empty stratum is NaN.
    """

    brier_full: float
    brier_missing_only: float
    brier_complete_only: float
    r_missing: float | None
    r_complete: float | None
    n_missing: int
    n_complete: int
    r_missing_retained: int = 0
    r_complete_retained: int = 0
    brier_per_replicate: dict | None = None

    @property
    def n(self) -> int:
        return self.n_missing + self.n_complete


def _stratum_briers(V, y, rows):
    if rows.size == 0:
        return [float("nan")] * V.shape[1]
    return [brier_score(V[rows, r], y[rows]) for r in range(V.shape[1])]


def build_report(replicates: ReplicateMatrix, dataset: Dataset) -> MetricsReport:
    V = replicates.values
    if V.shape[0] != dataset.n:
        raise ValueError(f"{V.shape[0]} prediction rows for {dataset.n} dataset rows")
    y = dataset.outcome.astype(float)
    missing, complete = stratify(dataset)
    per_rep = {
        "full": _stratum_briers(V, y, np.arange(dataset.n)),
        "missing": _stratum_briers(V, y, missing),
        "complete": _stratum_briers(V, y, complete),
    }

    def spread(rows):
        if V.shape[1] < 2 or rows.size == 0:
            return None, 0
        s = spread_measure_R(replicates, rows)
        return s.value, s.retained

    r_missing, kept_missing = spread(missing)
    r_complete, kept_complete = spread(complete)
    return MetricsReport(
        brier_full=float(np.mean(per_rep["full"])),
        brier_missing_only=float(np.mean(per_rep["missing"])),
        brier_complete_only=float(np.mean(per_rep["complete"])),
        r_missing=r_missing,
        r_complete=r_complete,
        n_missing=int(missing.size),
        n_complete=int(complete.size),
        r_missing_retained=kept_missing,
        r_complete_retained=kept_complete,
        brier_per_replicate=per_rep,
    )
