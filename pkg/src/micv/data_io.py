"""Delimited-file reading and writing of incomplete datasets."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .dataset import BINARY, Dataset, infer_kind

DEFAULT_MISSING = "NA"


class DataFormatError(ValueError):
    pass


def load_csv(path, missing_token: str = DEFAULT_MISSING, outcome_column: str = "y",
             delimiter: str = ",", allow_missing_outcome: bool = False) -> Dataset:
    """Read a header-row CSV into a :class:`Dataset`.

    Cells equal to ``missing_token`` become unobserved. A predictor column
    is binary when its observed values are all 0 or 1. Missing outcomes are
    an error unless ``allow_missing_outcome``, in which case they load as
    masked outcomes.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if outcome_column not in header:
            raise DataFormatError(f"{path}: no outcome column {outcome_column!r} in header")
        records = [row for row in reader if row]

    width = len(header)
    values = np.full((len(records), width), np.nan)
    for i, row in enumerate(records, start=2):
        if len(row) != width:
            raise DataFormatError(f"{path}:{i}: expected {width} cells, found {len(row)}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell == missing_token:
                continue
            try:
                values[i - 2, j] = float(cell)
            except ValueError:
                raise DataFormatError(f"{path}:{i}: column {header[j]!r}: cannot parse {cell!r}") from None
            if not np.isfinite(values[i - 2, j]):
                raise DataFormatError(f"{path}:{i}: column {header[j]!r}: non-finite value {cell!r}")

    yj = header.index(outcome_column)
    y = values[:, yj]
    ymask = ~np.isnan(y)
    if not ymask.all() and not allow_missing_outcome:
        raise DataFormatError(f"{path}: outcome column {outcome_column!r} has missing cells")
    if not np.all(np.isin(y[ymask], (0.0, 1.0))):
        raise DataFormatError(f"{path}: outcome column {outcome_column!r} must be 0/1")

    cols = [j for j in range(width) if j != yj]
    X = values[:, cols]
    mask = ~np.isnan(X)
    names = [header[j] for j in cols]
    for j, name in enumerate(names):
        if not mask[:, j].any():
            raise DataFormatError(f"{path}: column {name!r} is entirely missing")
    kinds = [infer_kind(X[mask[:, j], j]) for j in range(len(cols))]
    try:
        return Dataset(tuple(zip(names, kinds)), X, mask, np.where(ymask, y, 0).astype(np.int8), ymask, outcome_column)
    except ValueError as err:
        raise DataFormatError(f"{path}: {err}") from err


def _cell(v: float, kind: str) -> str:
    if kind == BINARY:
        return str(int(v))
    return repr(float(v))


def save_csv(dataset: Dataset, path, missing_token: str = DEFAULT_MISSING, delimiter: str = ",") -> Path:
    """Write predictors then the outcome; floats use ``repr`` so a reload is bit-identical."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    kinds = [kind for _, kind in dataset.columns]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(dataset.names + [dataset.outcome_name])
        for i in range(dataset.n):
            row = [
                _cell(dataset.predictors[i, j], kinds[j]) if dataset.predictor_mask[i, j] else missing_token
                for j in range(dataset.p)
            ]
            row.append(str(int(dataset.outcome[i])) if dataset.outcome_mask[i] else missing_token)
            w.writerow(row)
    return path
