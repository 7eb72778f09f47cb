"""Sweep harness: grid configs, raw trial rows, summaries, scaling fits.

A sweep config is a JSON object:

    {
      "protocol": "crash" | "byz",
      "n_values": [16, 64],
      "f_values": [0, 1, "n/8", "n-1", "fbound"],
      "adversaries": ["none", ...],
      "trials_per_cell": 100,
      "base_seed": 0,
      "epsilon0": 0.05,          # byz only, optional
      "N": null | 1280 | "5n^2" | "2n" | "n",
      "overrides": {...}          # passed through to the trial driver
    }

Raw results are one CSV row per trial, in deterministic grid order, so
identical configs produce byte-identical files no matter how many
worker processes ran the sweep.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np

from .adversaries import BYZ_STRATEGIES, CRASH_ADVERSARIES
from .byz_params import ByzParams
from .byz_protocol import run_byz_trial
from .crash_protocol import run_crash_trial
from .errors import ConfigError

RAW_HEADER = ("protocol", "n", "N", "f_budget", "f_actual", "seed", "rounds",
              "messages", "bits", "success", "monitor_failures")

_F_DIV = re.compile(r"^n/(\d+)$")


class InsufficientData(ValueError):
    """Too few distinct grid points to fit a scaling model."""


@dataclass(frozen=True)
class SweepSpec:
    protocol: str
    n_values: tuple
    f_values: tuple
    adversaries: tuple
    trials_per_cell: int
    base_seed: int = 0
    epsilon0: float | None = None
    namespace: int | str | None = None
    overrides: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepSpec":
        d = dict(raw)
        protocol = d.pop("protocol", None)
        if protocol not in ("crash", "byz"):
            raise ConfigError(f"protocol must be crash or byz, got {protocol!r}")
        n_values = tuple(int(x) for x in d.pop("n_values", ()))
        if not n_values or any(n < 2 for n in n_values):
            raise ConfigError("n_values must be a non-empty list of ints >= 2")
        f_values = tuple(d.pop("f_values", (0,)))
        valid = CRASH_ADVERSARIES if protocol == "crash" else BYZ_STRATEGIES
        adversaries = tuple(d.pop("adversaries", None) or (valid[0],))
        unknown = set(adversaries) - set(valid)
        if unknown:
            raise ConfigError(f"unknown adversaries for {protocol}: {sorted(unknown)}")
        trials = int(d.pop("trials_per_cell", 0))
        if trials < 1:
            raise ConfigError("trials_per_cell must be >= 1")
        base_seed = int(d.pop("base_seed", 0))
        epsilon0 = d.pop("epsilon0", None)
        if epsilon0 is not None:
            epsilon0 = float(epsilon0)
        namespace = d.pop("N", None)
        overrides = dict(d.pop("overrides", None) or {})
        if d:
            raise ConfigError(f"unknown sweep keys {sorted(d)}")
        spec = cls(protocol, n_values, f_values, adversaries, trials,
                   base_seed, epsilon0, namespace, overrides)
        build_tasks(spec)  # fail fast on bad f tokens or namespace
        return spec

    @classmethod
    def from_json(cls, path: str) -> "SweepSpec":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"bad sweep config {path}: {exc}") from exc
        return cls.from_dict(raw)


def resolve_namespace(token, n: int, protocol: str) -> int:
    if token is None:
        return 5 * n * n if protocol == "byz" else 2 * n
    if isinstance(token, int):
        if token < n:
            raise ConfigError(f"namespace {token} smaller than n={n}")
        return token
    if token == "5n^2":
        return 5 * n * n
    if token == "2n":
        return 2 * n
    if token == "n":
        return n
    raise ConfigError(f"unknown namespace token {token!r}")


def resolve_f(token, n: int, N: int, epsilon0: float | None = None,
              p0_override: float | None = None) -> int:
    if isinstance(token, bool):
        raise ConfigError(f"bad fault token {token!r}")
    if isinstance(token, int):
        f = token
    elif token == "n-1":
        f = n - 1
    elif token == "fbound":
        f = ByzParams.for_namespace(
            n, N, epsilon0 if epsilon0 is not None else 0.05,
            p0_override).f_bound
    elif isinstance(token, str) and _F_DIV.match(token):
        f = n // int(_F_DIV.match(token).group(1))
    else:
        raise ConfigError(f"bad fault token {token!r}")
    if not 0 <= f < n:
        raise ConfigError(f"fault budget {f} outside [0, {n}) for token {token!r}")
    return f


def build_tasks(spec: SweepSpec, log_level: str = "off") -> list:
    overrides = dict(spec.overrides)
    if spec.protocol == "byz" and spec.epsilon0 is not None:
        overrides.setdefault("epsilon0", spec.epsilon0)
    tasks = []
    for n in spec.n_values:
        N = resolve_namespace(spec.namespace, n, spec.protocol)
        for token in spec.f_values:
            f = resolve_f(token, n, N, spec.epsilon0,
                          overrides.get("p0") if spec.protocol == "byz" else None)
            for adv in spec.adversaries:
                for t in range(spec.trials_per_cell):
                    tasks.append((spec.protocol, n, N, adv, f,
                                  spec.base_seed + t, overrides, log_level))
    return tasks


def row_from_transcript(task, tr) -> tuple:
    """One raw CSV row for a finished trial, in RAW_HEADER order."""
    protocol, n, N, _adv, f, seed, _overrides, _log_level = task
    return (protocol, n, N, f, tr.f_actual, seed, tr.metrics.rounds_total,
            tr.metrics.messages_total, tr.metrics.bits_total,
            int(tr.success), ";".join(tr.monitor_failures))


def _run_task(task) -> tuple:
    protocol, n, N, adv, f, seed, overrides, log_level = task
    runner = run_crash_trial if protocol == "crash" else run_byz_trial
    tr = runner(n, N, seed, {"name": adv, "budget_f": f}, overrides, log_level)
    return row_from_transcript(task, tr)


def run_sweep(spec: SweepSpec, jobs: int = 1, log_level: str = "off") -> list:
    """All trial rows in grid order; worker count never changes the rows."""
    tasks = build_tasks(spec, log_level)
    if jobs <= 1 or len(tasks) < 2:
        return [_run_task(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * jobs))
    with get_context("fork").Pool(jobs) as pool:
        return pool.map(_run_task, tasks, chunksize=chunk)


def write_raw_csv(rows, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RAW_HEADER)
        w.writerows(rows)


def read_raw_csv(path: str) -> list:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != RAW_HEADER:
            raise ConfigError(f"{path} is not a raw sweep file")
        for r in reader:
            out.append((r[0], int(r[1]), int(r[2]), int(r[3]), int(r[4]),
                        int(r[5]), int(r[6]), int(r[7]), int(r[8]),
                        int(r[9]), r[10]))
    return out


@dataclass(frozen=True)
class CellSummary:
    trials: int
    success_rate: float
    messages_mean: float
    messages_p99: float
    messages_max: int
    bits_mean: float
    rounds_mean: float


def summarize(rows) -> dict:
    """Per-cell stats keyed by (protocol, n, N, f_budget)."""
    cells: dict = {}
    for r in rows:
        cells.setdefault((r[0], r[1], r[2], r[3]), []).append(r)
    out = {}
    for key, group in sorted(cells.items()):
        msgs = np.array([g[7] for g in group], dtype=np.int64)
        out[key] = CellSummary(
            trials=len(group),
            success_rate=float(np.mean([g[9] for g in group])),
            messages_mean=float(msgs.mean()),
            messages_p99=float(np.percentile(msgs, 99, method="higher")),
            messages_max=int(msgs.max()),
            bits_mean=float(np.mean([g[8] for g in group])),
            rounds_mean=float(np.mean([g[6] for g in group])),
        )
    return out


def write_summary_csv(summaries: dict, path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("protocol", "n", "N", "f_budget", "trials", "success_rate",
                    "messages_mean", "messages_p99", "messages_max",
                    "bits_mean", "rounds_mean"))
        for key, s in summaries.items():
            w.writerow(key + (s.trials, s.success_rate, s.messages_mean,
                              s.messages_p99, s.messages_max, s.bits_mean,
                              s.rounds_mean))


# basis columns for least-squares message fits
MODELS = {
    # quiet network: messages grow as n * log2(n)^2
    "quiet-committee": lambda n, N, f: (n * math.log2(n) ** 2,),
    # crash pressure: (f + log2 n) committee rebuilds, each n log n
    "fault-committee": lambda n, N, f: ((f + math.log2(n)) * n * math.log2(n),),
    # byz divide-and-conquer loop plus the baseline agreement traffic
    "byz-loop": lambda n, N, f: (max(f, 1) * math.log2(N) * math.log2(n) ** 3,
                                 n * math.log2(n)),
}


@dataclass(frozen=True)
class FitResult:
    model: str
    coeffs: tuple
    rmse: float
    points: int


def fit_scaling(rows, model: str) -> FitResult:
    """Least-squares coefficients of a named model over raw rows."""
    if model not in MODELS:
        raise ConfigError(f"unknown model {model!r}; have {sorted(MODELS)}")
    basis = MODELS[model]
    points = [(r[1], r[2], r[3], r[7]) for r in rows]
    distinct = {(n, N, f) for n, N, f, _ in points}
    if len(distinct) < 4:
        raise InsufficientData(
            f"need at least 4 distinct (n, N, f) points, got {len(distinct)}")
    a = np.array([basis(n, N, f) for n, N, f, _ in points], dtype=float)
    b = np.array([m for _, _, _, m in points], dtype=float)
    coeffs, _, _, _ = np.linalg.lstsq(a, b, rcond=None)
    rmse = float(np.sqrt(np.mean((a @ coeffs - b) ** 2)))
    return FitResult(model, tuple(float(c) for c in coeffs), rmse, len(points))
