"""Cross-validated calibration of a logistic prediction rule under multiple imputation.

Three strategies, all sharing one leak-proof unit of work: mask the
validation fold's outcomes, impute the combined data, fit on the
calibration rows, predict the validation rows.

* ``approach1`` - K repetitions, each with fresh folds and one imputation
  per fold; every individual gets K predictions from K different models.
* ``approach2`` - folds fixed; per fold K imputations, K fits pooled to one
  mean coefficient vector, applied to each of the K imputed validation rows.
* ``approach3`` - as approach 2, but each validation row's K imputations
  are averaged first and the pooled model is applied once.

Random streams are addressed by coordinates, not consumed in sequence:
folds for repetition ``k`` come from ``(FOLDS, k)`` and the imputation for
repetition/imputation ``k`` in fold ``l`` from ``(IMPUTE, k, l)``. With
K=1 all three approaches therefore see the same folds and imputations and
agree exactly, and units can run in any order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .glm import CoefficientVector, FitError, fit_logistic, pool_coefficients, predict_proba
from .imputation import ImputationConfig, ImputationError, impute_once

FOLDS = 0
IMPUTE = 1

MEAN = "mean"
MEDIAN = "median"


class AnalysisError(RuntimeError):
    """A unit of work failed; ``coordinates`` says which one."""

    def __init__(self, message: str, **coordinates):
        self.reason = message
        self.coordinates = dict(coordinates)
        super().__init__(self._render())

    def _render(self):
        where = ", ".join(f"{k}={v}" for k, v in self.coordinates.items())
        return f"[{where}] {self.reason}" if where else self.reason

    def at(self, **coordinates) -> AnalysisError:
        """Prepend outer coordinates (e.g. approach, K, replicate)."""
        merged = {**coordinates, **self.coordinates}
        err = AnalysisError(self.reason, **merged)
        err.__cause__ = self.__cause__
        return err


def substream(seed, *key: int) -> np.random.SeedSequence:
    """Child seed addressed by ``key`` below ``seed`` (int or SeedSequence)."""
    base = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.SeedSequence(base.entropy, spawn_key=tuple(base.spawn_key) + tuple(int(k) for k in key))


def generator(seed, *key: int) -> np.random.Generator:
    return np.random.default_rng(substream(seed, *key))


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    fold_of: np.ndarray
    fold_count: int

    def __post_init__(self):
        fold_of = np.asarray(self.fold_of, dtype=int)
        counts = np.bincount(fold_of, minlength=self.fold_count + 1)[1:]
        if fold_of.min() < 1 or fold_of.max() > self.fold_count or np.any(counts == 0):
            raise ValueError("every fold 1..L must be used and no other label")
        if counts.max() - counts.min() > 1:
            raise ValueError("fold sizes must differ by at most one")
        fold_of.setflags(write=False)
        object.__setattr__(self, "fold_of", fold_of)

    def members(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of, minlength=self.fold_count + 1)[1:]


def make_folds(n: int, L: int, rng) -> FoldAssignment:
    """Uniformly random balanced partition of ``range(n)`` into folds 1..L."""
    if L < 2 or L > n:
        raise ValueError(f"need 2 <= L <= n, got L={L}, n={n}")
    rng = np.random.default_rng(rng)
    return FoldAssignment(rng.permutation(np.arange(n) % L + 1), L)


def repetition_folds(n: int, L: int, seed, k: int = 0) -> FoldAssignment:
    """The fold assignment every approach uses for repetition ``k``.

    Approaches 2 and 3 only ever use ``k=0``.
    """
    return make_folds(n, L, generator(seed, FOLDS, k))


def mask_fold_outcomes(dataset: Dataset, folds: FoldAssignment, fold: int) -> Dataset:
    if not 1 <= fold <= folds.fold_count:
        raise ValueError(f"fold must be in 1..{folds.fold_count}")
    if folds.fold_of.size != dataset.n:
        raise ValueError("fold assignment does not match dataset size")
    return dataset.with_outcome_mask(dataset.outcome_mask & (folds.fold_of != fold))


@dataclass(frozen=True, eq=False)
class PredictionMatrix:
    values: np.ndarray
    summary_kind: str = MEAN

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] < 1:
            raise ValueError("prediction matrix must be n x K with K >= 1")
        if not np.all((v > 0.0) & (v < 1.0)):
            raise ValueError("predicted probabilities must lie strictly inside (0, 1)")
        if self.summary_kind not in (MEAN, MEDIAN):
            raise ValueError(f"summary_kind must be {MEAN!r} or {MEDIAN!r}")
        object.__setattr__(self, "values", v)

    @property
    def K(self) -> int:
        return self.values.shape[1]


def summarize(matrix: PredictionMatrix) -> np.ndarray:
    """Final per-individual prediction: row mean or row median over the K columns."""
    if matrix.summary_kind == MEDIAN:
        return np.median(matrix.values, axis=1)
    return matrix.values.mean(axis=1)


def _fit_calibration(masked: Dataset, completed: np.ndarray) -> CoefficientVector:
    calib = masked.outcome_mask
    design = np.column_stack([np.ones(int(calib.sum())), completed[calib]])
    coef, _ = fit_logistic(design, masked.outcome[calib])
    return coef


def _calibrate(dataset, folds, fold, config, seed_seq):
    """Mask, impute once, fit. Returns ``(coefficients, completed validation rows)``."""
    masked = mask_fold_outcomes(dataset, folds, fold)
    completed = impute_once(masked, config, np.random.default_rng(seed_seq)).predictors
    coef = _fit_calibration(masked, completed)
    return coef, completed[folds.fold_of == fold]


def single_imputation_predictions(dataset, folds, fold, config, seed_seq) -> np.ndarray:
    """One approach-1 unit: predictions for the rows of ``fold``."""
    coef, rows = _calibrate(dataset, folds, fold, config, seed_seq)
    return predict_proba(coef, rows)


def pooled_fold(dataset, folds, fold, K, config, seed, k_offset=0):
    """Approach-2/3 calibration for one fold.

    Returns the pooled coefficients and the ``(K, m, p)`` stack of imputed
    validation rows.
    """
    fits, stacks = [], []
    for k in range(K):
        s = substream(seed, IMPUTE, k + k_offset, fold - 1)
        coef, rows = _guard(lambda: _calibrate(dataset, folds, fold, config, s), k=k + k_offset + 1)
        fits.append(coef)
        stacks.append(rows)
    return pool_coefficients(fits), np.stack(stacks)


def average_imputations(stack: np.ndarray, binary_columns) -> np.ndarray:
    """Element-wise mean over the K imputed copies of each row.

    Binary columns are rounded back to {0, 1}, ties going to 1. Cells that
    agree across all copies (observed cells) come back exactly.
    """
    avg = stack[0] + (stack - stack[0]).mean(axis=0)
    binary = np.asarray(binary_columns, dtype=bool)
    avg[:, binary] = np.where(avg[:, binary] >= 0.5, 1.0, 0.0)
    return avg


def _guard(fn, **coords):
    try:
        return fn()
    except AnalysisError as err:
        raise err.at(**coords) from err.__cause__
    except (FitError, ImputationError, np.linalg.LinAlgError, ValueError) as err:
        raise AnalysisError(f"{type(err).__name__}: {err}", **coords) from err


def _check(dataset: Dataset, K: int, L: int):
    if K < 1:
        raise ValueError("K must be >= 1")
    if L < 2 or L > dataset.n:
        raise ValueError(f"need 2 <= L <= n, got L={L}")


def approach1(dataset: Dataset, K: int, L: int = 10, config: ImputationConfig = ImputationConfig(),
              seed=0, summary_kind: str = MEAN) -> PredictionMatrix:
    """Prediction pooling: K single-imputation cross-validations with fresh folds each time."""
    _check(dataset, K, L)
    out = np.empty((dataset.n, K))
    for k in range(K):
        folds = repetition_folds(dataset.n, L, seed, k)
        for fold in range(1, L + 1):
            s = substream(seed, IMPUTE, k, fold - 1)
            out[folds.members(fold), k] = _guard(
                lambda: single_imputation_predictions(dataset, folds, fold, config, s), k=k + 1, fold=fold
            )
    return PredictionMatrix(out, summary_kind)


def approach2(dataset: Dataset, K: int, L: int = 10, config: ImputationConfig = ImputationConfig(),
              seed=0, summary_kind: str = MEAN) -> PredictionMatrix:
    """Coefficient pooling: fixed folds, one Rubin's-rule model per fold applied to each imputed row."""
    _check(dataset, K, L)
    out = np.empty((dataset.n, K))
    folds = repetition_folds(dataset.n, L, seed, 0)
    for fold in range(1, L + 1):
        pooled, stack = _guard(lambda: pooled_fold(dataset, folds, fold, K, config, seed), fold=fold)
        idx = folds.members(fold)
        for k in range(K):
            out[idx, k] = predict_proba(pooled, stack[k])
    return PredictionMatrix(out, summary_kind)


def approach3(dataset: Dataset, K: int, L: int = 10, config: ImputationConfig = ImputationConfig(),
              seed=0, summary_kind: str = MEAN) -> PredictionMatrix:
    """Coefficient pooling applied once to the averaged imputed row; columns repeated K times."""
    _check(dataset, K, L)
    out = np.empty((dataset.n, K))
    folds = repetition_folds(dataset.n, L, seed, 0)
    binary = dataset.binary_columns
    for fold in range(1, L + 1):
        pooled, stack = _guard(lambda: pooled_fold(dataset, folds, fold, K, config, seed), fold=fold)
        p = predict_proba(pooled, average_imputations(stack, binary))
        out[folds.members(fold), :] = p[:, None]
    return PredictionMatrix(out, summary_kind)


APPROACHES = {1: approach1, 2: approach2, 3: approach3}
