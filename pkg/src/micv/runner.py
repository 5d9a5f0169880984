"""Batch driver: approaches x K x replicate analyses, metrics tables, figure tables.

Every (approach, K, replicate) cell is an independent unit seeded from
``(master_seed, replicate)``; the seed deliberately does not depend on the
approach so that with K=1 the three approaches reproduce each other. Units
may run in worker processes, and results are always reassembled by index,
so output files do not depend on ``jobs``.
"""

from __future__ import annotations

import configparser
import csv
import json
import logging
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy
from threadpoolctl import threadpool_limits

from . import __version__
from .cv import APPROACHES, MEAN, MEDIAN, AnalysisError, PredictionMatrix, substream, summarize
from .data_io import DEFAULT_MISSING, load_csv
from .dataset import Dataset
from .imputation import ImputationConfig
from .metrics import STRATA, MetricsReport, ReplicateMatrix, build_report
from .simulate import SCENARIOS, generate, scenario_by_name

log = logging.getLogger(__name__)

DESK_K = (1, 10, 50, 200)
FULL_K = (1, 10, 100, 1000)
DESK_MAX_K = 200
DESK_MAX_N = 600

METRICS_FILE = "metrics.csv"
MANIFEST_FILE = "manifest.json"
METRIC_COLUMNS = ("approach", "K", "replicate", "stratum", "metric", "value")


class ReportError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    input: str = "crt-like"
    approaches: tuple[int, ...] = (1, 2, 3)
    K_values: tuple[int, ...] | None = None
    L: int = 10
    replicates: int = 10
    summary_kind: str = MEAN
    imputation: ImputationConfig = field(default_factory=ImputationConfig)
    master_seed: int = 0
    output_dir: str = "results"
    jobs: int = 1
    full: bool = False
    n: int | None = None
    scenario_seed: int = 0
    outcome_column: str = "y"
    missing_token: str = DEFAULT_MISSING

    def __post_init__(self):
        ks = self.K_values if self.K_values is not None else (FULL_K if self.full else DESK_K)
        object.__setattr__(self, "K_values", tuple(int(k) for k in ks))
        object.__setattr__(self, "approaches", tuple(int(a) for a in self.approaches))
        if not self.K_values or min(self.K_values) < 1:
            raise ValueError("K_values must be a non-empty list of positive counts")
        if not self.full and max(self.K_values) > DESK_MAX_K:
            raise ValueError(f"K above {DESK_MAX_K} needs the full design (--full)")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.L < 2:
            raise ValueError("L must be >= 2")
        if not self.approaches or not set(self.approaches) <= set(APPROACHES):
            raise ValueError(f"approaches must be a non-empty subset of {sorted(APPROACHES)}")
        if self.summary_kind not in (MEAN, MEDIAN):
            raise ValueError(f"summary_kind must be {MEAN!r} or {MEDIAN!r}")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.n is not None and self.input in SCENARIOS and not self.full and self.n > DESK_MAX_N:
            raise ValueError(f"n above {DESK_MAX_N} needs the full design (--full)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["approaches"] = list(self.approaches)
        d["K_values"] = list(self.K_values)
        return d


def load_config(path, **overrides) -> ExperimentConfig:
    """Read an INI-style experiment file; see the README for the grammar."""
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    allowed = {
        "experiment": {"input", "approaches", "k", "folds", "replicates", "summary", "seed", "jobs",
                       "full", "n", "scenario_seed", "outcome_column", "missing_token"},
        "imputation": {"sweeps", "method", "donors"},
        "output": {"directory"},
    }
    for section in parser.sections():
        if section not in allowed:
            raise ValueError(f"{path}: unknown section [{section}]")
        unknown = set(parser[section]) - allowed[section]
        if unknown:
            raise ValueError(f"{path}: unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")

    def ints(text):
        return tuple(int(v) for v in text.replace(",", " ").split())

    kw: dict = {}
    if parser.has_section("experiment"):
        ex = parser["experiment"]
        plain = {"input": "input", "summary": "summary_kind", "outcome_column": "outcome_column",
                 "missing_token": "missing_token"}
        for key, name in plain.items():
            if key in ex:
                kw[name] = ex[key].strip()
        for key, name in {"folds": "L", "replicates": "replicates", "seed": "master_seed", "jobs": "jobs",
                          "n": "n", "scenario_seed": "scenario_seed"}.items():
            if key in ex:
                kw[name] = ex.getint(key)
        if "approaches" in ex:
            kw["approaches"] = ints(ex["approaches"])
        if "k" in ex:
            kw["K_values"] = ints(ex["k"])
        if "full" in ex:
            kw["full"] = ex.getboolean("full")
    imp = {}
    if parser.has_section("imputation"):
        sec = parser["imputation"]
        if "sweeps" in sec:
            imp["sweeps"] = sec.getint("sweeps")
        if "method" in sec:
            imp["continuous_method"] = sec["method"].strip()
        if "donors" in sec:
            imp["donor_count"] = sec.getint("donors")
    if parser.has_section("output") and "directory" in parser["output"]:
        kw["output_dir"] = parser["output"]["directory"].strip()
    kw.update({k: v for k, v in overrides.items() if v is not None})
    kw["imputation"] = ImputationConfig(**imp)
    return ExperimentConfig(**kw)


def resolve_dataset(config: ExperimentConfig) -> Dataset:
    if config.input in SCENARIOS:
        scenario = scenario_by_name(config.input, rng_seed=config.scenario_seed)
        n = config.n if config.n is not None else (scenario.n if config.full else min(scenario.n, DESK_MAX_N))
        return generate(scenario_by_name(config.input, n=n, rng_seed=config.scenario_seed))
    path = Path(config.input)
    if not path.exists():
        raise FileNotFoundError(f"input {config.input!r} is neither a scenario ({', '.join(SCENARIOS)}) nor a file")
    return load_csv(path, config.missing_token, config.outcome_column)


_WORKER_DATASET: Dataset | None = None


def _init_worker(dataset):
    global _WORKER_DATASET
    _WORKER_DATASET = dataset


def run_unit(dataset: Dataset, approach: int, K: int, replicate: int, config: ExperimentConfig) -> np.ndarray:
    """Final per-individual predictions of one replicate analysis."""
    seed = substream(config.master_seed, replicate)
    with threadpool_limits(limits=1):
        try:
            matrix: PredictionMatrix = APPROACHES[approach](
                dataset, K, config.L, config.imputation, seed=seed, summary_kind=config.summary_kind
            )
        except AnalysisError as err:
            raise err.at(approach=approach, K=K, replicate=replicate + 1) from err.__cause__
        except ValueError as err:
            raise AnalysisError(str(err), approach=approach, K=K, replicate=replicate + 1) from err
    return summarize(matrix)


def _worker(args):
    approach, K, replicate, config = args
    return run_unit(_WORKER_DATASET, approach, K, replicate, config)


def _cells(config):
    return [(a, K) for a in config.approaches for K in config.K_values]


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return "NA"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def metric_rows(approach: int, K: int, report: MetricsReport) -> list[tuple]:
    """Long-format rows for one (approach, K) cell."""
    rows = []
    per = report.brier_per_replicate
    for r in range(len(per["full"])):
        for stratum in STRATA:
            rows.append((approach, K, r + 1, stratum, "brier", per[stratum][r]))
    means = {"full": report.brier_full, "missing": report.brier_missing_only, "complete": report.brier_complete_only}
    for stratum in STRATA:
        rows.append((approach, K, "mean", stratum, "brier", means[stratum]))
    rows.append((approach, K, "all", "missing", "R", report.r_missing))
    rows.append((approach, K, "all", "complete", "R", report.r_complete))
    rows.append((approach, K, "all", "missing", "R_retained", report.r_missing_retained))
    rows.append((approach, K, "all", "complete", "R_retained", report.r_complete_retained))
    counts = {"full": report.n, "missing": report.n_missing, "complete": report.n_complete}
    for stratum in STRATA:
        rows.append((approach, K, "all", stratum, "n", counts[stratum]))
    return rows


@dataclass
class RunResult:
    output_dir: Path
    reports: dict
    predictions: dict
    files: list


def run(config: ExperimentConfig, dataset: Dataset | None = None) -> RunResult:
    """Run every (approach, K, replicate) analysis and write results to ``config.output_dir``."""
    if dataset is None:
        dataset = resolve_dataset(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    units = [(a, K, r) for a, K in _cells(config) for r in range(config.replicates)]
    log.info("running %d analyses on n=%d with jobs=%d", len(units), dataset.n, config.jobs)
    if config.jobs == 1 or len(units) == 1:
        finals = [run_unit(dataset, a, K, r, config) for a, K, r in units]
    else:
        with ProcessPoolExecutor(config.jobs, initializer=_init_worker, initargs=(dataset,)) as pool:
            finals = list(pool.map(_worker, [(a, K, r, config) for a, K, r in units]))

    reports, predictions, files = {}, {}, []
    rows = []
    for i, (a, K) in enumerate(_cells(config)):
        block = finals[i * config.replicates : (i + 1) * config.replicates]
        V = np.column_stack(block)
        predictions[(a, K)] = V
        reports[(a, K)] = build_report(ReplicateMatrix(V), dataset)
        rows.extend(metric_rows(a, K, reports[(a, K)]))
        files.append(_write_predictions(out / f"predictions_a{a}_K{K}.csv", V, dataset))

    metrics_path = out / METRICS_FILE
    with metrics_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for row in rows:
            w.writerow([_fmt(v) if i == 5 else str(v) for i, v in enumerate(row)])
    files.insert(0, metrics_path)

    manifest = {
        "config": config.to_dict(),
        "seeds": {
            "master_seed": config.master_seed,
            "replicate_seed": "SeedSequence(master_seed, spawn_key=(replicate - 1,))",
            "replicates": [
                {"replicate": r + 1, "entropy": config.master_seed, "spawn_key": [r]} for r in range(config.replicates)
            ],
        },
        "dataset": {
            "source": config.input,
            "n": dataset.n,
            "p": dataset.p,
            "columns": [list(c) for c in dataset.columns],
            "incomplete_rows": int(dataset.incomplete_rows.sum()),
            "events": int(dataset.outcome.sum()),
        },
        "cells": [[a, K] for a, K in _cells(config)],
        "files": [p.name for p in files],
        "versions": {
            "micv": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    (out / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return RunResult(out, reports, predictions, files)


def _write_predictions(path: Path, V: np.ndarray, dataset: Dataset) -> Path:
    incomplete = dataset.incomplete_rows
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "outcome", "incomplete"] + [f"rep{r + 1}" for r in range(V.shape[1])])
        for i in range(V.shape[0]):
            w.writerow([i + 1, int(dataset.outcome[i]), int(incomplete[i])] + [repr(float(v)) for v in V[i]])
    return path


def read_metrics(results_dir) -> list[dict]:
    path = Path(results_dir) / METRICS_FILE
    if not path.exists():
        raise ReportError(f"{path} not found")
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def report(results_dir, write: bool = True) -> dict[str, list[dict]]:
    """Figure-ready tables: Brier vs K and R vs K, by approach and stratum.

    R rows for K=1 are left out (all approaches coincide there); they stay
    in ``metrics.csv``.
    """
    results_dir = Path(results_dir)
    manifest_path = results_dir / MANIFEST_FILE
    if not manifest_path.exists():
        raise ReportError(f"{manifest_path} not found; not a results directory")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    rows = read_metrics(results_dir)

    brier, spread = [], []
    for a, K in manifest["cells"]:
        cell = [r for r in rows if int(r["approach"]) == a and int(r["K"]) == K]
        if not cell:
            raise ReportError(f"no metrics for approach={a}, K={K}: partial results")
        for stratum in STRATA:
            hit = [r for r in cell if r["replicate"] == "mean" and r["stratum"] == stratum and r["metric"] == "brier"]
            if len(hit) != 1:
                raise ReportError(f"missing mean Brier for approach={a}, K={K}, stratum={stratum}")
            brier.append({"approach": a, "K": K, "stratum": stratum, "brier": hit[0]["value"]})
        if K == 1:
            continue
        for stratum in ("missing", "complete"):
            hit = [r for r in cell if r["replicate"] == "all" and r["stratum"] == stratum and r["metric"] == "R"]
            if len(hit) != 1:
                raise ReportError(f"missing R for approach={a}, K={K}, stratum={stratum}")
            spread.append({"approach": a, "K": K, "stratum": stratum, "R": hit[0]["value"]})

    tables = {"brier_vs_K": brier, "R_vs_K": spread}
    if write:
        for name, table in tables.items():
            cols = ["approach", "K", "stratum", "brier" if name == "brier_vs_K" else "R"]
            with (results_dir / f"{name}.csv").open("w", newline="", encoding="utf-8") as fh:
                w = csv.DictWriter(fh, cols, lineterminator="\n")
                w.writeheader()
                w.writerows(table)
    return tables

