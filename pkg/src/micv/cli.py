"""Command line: ``micv simulate | run | report``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .cv import AnalysisError
from .data_io import DEFAULT_MISSING, DataFormatError, save_csv
from .imputation import METHODS, ImputationConfig
from .runner import ExperimentConfig, ReportError, load_config, report, run
from .simulate import SCENARIOS, generate, scenario_by_name


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="micv", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write a synthetic incomplete dataset to CSV")
    sim.add_argument("--scenario", choices=sorted(SCENARIOS), default="crt-like")
    sim.add_argument("--n", type=int, help="rows (default: the preset size)")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--missing-token", default=DEFAULT_MISSING)
    sim.add_argument("-o", "--out", required=True)

    r = sub.add_parser("run", help="run the approaches x K x replicate design")
    r.add_argument("--config", help="INI experiment file; flags below override it")
    r.add_argument("--input", help="CSV path or scenario name")
    r.add_argument("--approaches", type=_ints)
    r.add_argument("--K", dest="K_values", type=_ints)
    r.add_argument("--folds", dest="L", type=int)
    r.add_argument("--replicates", type=int)
    r.add_argument("--summary", dest="summary_kind", choices=("mean", "median"))
    r.add_argument("--seed", dest="master_seed", type=int)
    r.add_argument("--jobs", type=int, help="worker processes (results do not depend on it)")
    r.add_argument("--n", type=int, help="scenario size override")
    r.add_argument("--outcome-column")
    r.add_argument("--missing-token")
    r.add_argument("--sweeps", type=int)
    r.add_argument("--method", choices=METHODS)
    r.add_argument("--donors", type=int)
    r.add_argument("--full", action="store_true", default=None, help="full-scale design: K up to 1000, preset n")
    r.add_argument("-o", "--out", dest="output_dir")

    rep = sub.add_parser("report", help="turn a results directory into figure tables")
    rep.add_argument("results")
    return parser


def _run_config(args) -> ExperimentConfig:
    overrides = {
        k: getattr(args, k)
        for k in ("input", "approaches", "K_values", "L", "replicates", "summary_kind", "master_seed", "jobs",
                  "n", "outcome_column", "missing_token", "full", "output_dir")
    }
    imp = {"sweeps": args.sweeps, "continuous_method": args.method, "donor_count": args.donors}
    imp = {k: v for k, v in imp.items() if v is not None}
    if args.config:
        config = load_config(args.config, **overrides)
    else:
        config = ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})
    if imp:
        base = config.imputation
        merged = {**{"sweeps": base.sweeps, "continuous_method": base.continuous_method,
                     "donor_count": base.donor_count}, **imp}
        config = dataclasses.replace(config, imputation=ImputationConfig(**merged))
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "simulate":
            overrides = {"rng_seed": args.seed}
            if args.n is not None:
                overrides["n"] = args.n
            path = save_csv(generate(scenario_by_name(args.scenario, **overrides)), args.out, args.missing_token)
            print(path)
        elif args.command == "run":
            result = run(_run_config(args))
            print(result.output_dir)
        else:
            tables = report(args.results)
            print(f"{args.results}: {len(tables['brier_vs_K'])} Brier rows, {len(tables['R_vs_K'])} R rows")
    except AnalysisError as err:
        print(f"micv: analysis failed {err}", file=sys.stderr)
        return 3
    except (ValueError, DataFormatError, ReportError, FileNotFoundError) as err:
        print(f"micv: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
