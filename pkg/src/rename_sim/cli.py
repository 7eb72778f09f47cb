"""Command line front end.

    rename-sim run --config sweep.json --out-dir results [--jobs 4] [--log L]
    rename-sim fit --raw results/raw.csv --model quiet-committee
    rename-sim oracle --n 4 [--budget 2] [--mutate rank-off-by-one]

Exit codes: 0 on success, 1 when the requested check found problems
(oracle violations, a fit without enough data), 2 on configuration or
usage errors. The RENAME_SIM_LOG environment variable picks the default
log level; --log wins when both are set.
"""

from __future__ import annotations

import argparse
import os
import sys

from .crash_oracle import MUTATIONS, exhaustive_check
from .errors import ConfigError
from .harness import (MODELS, InsufficientData, SweepSpec, fit_scaling,
                      read_raw_csv, run_sweep, summarize, write_raw_csv,
                      write_summary_csv)

_LOG_LEVELS = ("off", "summary", "trace")


def _log_level(flag: str | None) -> str:
    if flag is not None:
        return flag
    env = os.environ.get("RENAME_SIM_LOG", "off")
    if env not in _LOG_LEVELS:
        raise ConfigError(f"RENAME_SIM_LOG must be one of {_LOG_LEVELS}, got {env!r}")
    return env


def _cmd_run(args) -> int:
    spec = SweepSpec.from_json(args.config)
    rows = run_sweep(spec, jobs=args.jobs, log_level=_log_level(args.log))
    os.makedirs(args.out_dir, exist_ok=True)
    raw_path = os.path.join(args.out_dir, "raw.csv")
    write_raw_csv(rows, raw_path)
    write_summary_csv(summarize(rows), os.path.join(args.out_dir, "summary.csv"))
    failed = sum(1 for r in rows if not r[9])
    print(f"{len(rows)} trials -> {raw_path} ({failed} failed)")
    return 0


def _cmd_fit(args) -> int:
    rows = read_raw_csv(args.raw)
    try:
        res = fit_scaling(rows, args.model)
    except InsufficientData as exc:
        print(f"fit aborted: {exc}", file=sys.stderr)
        return 1
    coeffs = ", ".join(f"{c:.6g}" for c in res.coeffs)
    print(f"{res.model}: coeffs [{coeffs}] rmse {res.rmse:.6g} over {res.points} rows")
    return 0


def _cmd_oracle(args) -> int:
    mutation = args.mutate.replace("-", "_") if args.mutate else None
    if mutation is not None and mutation not in MUTATIONS:
        raise ConfigError(f"unknown mutation {args.mutate!r}; have "
                          f"{sorted(m.replace('_', '-') for m in MUTATIONS)}")
    report = exhaustive_check(args.n, budget=args.budget, mutation=mutation)
    print(f"n={report.n} budget={report.budget} states={report.states_visited} "
          f"terminal={report.terminal_states}")
    if report.violation:
        print(f"violation: {report.violation}")
        return 1
    print("no violations")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rename-sim",
        description="deterministic renaming protocol simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a sweep config")
    p.add_argument("--config", required=True, help="sweep JSON path")
    p.add_argument("--out-dir", required=True, help="directory for CSV output")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--log", choices=_LOG_LEVELS, default=None)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("fit", help="fit a scaling model to a raw CSV")
    p.add_argument("--raw", required=True, help="raw.csv from a run")
    p.add_argument("--model", required=True, choices=sorted(MODELS))
    p.set_defaults(fn=_cmd_fit)

    p = sub.add_parser("oracle", help="exhaustively check tiny instances")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--mutate", default=None)
    p.set_defaults(fn=_cmd_oracle)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
