"""Deterministic simulator for two fault-tolerant strong renaming protocols."""

from .byz_params import ByzParams
from .byz_protocol import run_byz_trial
from .crash_oracle import exhaustive_check
from .crash_protocol import run_crash_trial
from .engine import Engine, Transcript
from .harness import SweepSpec, fit_scaling, run_sweep, summarize

__version__ = "0.1.0"

__all__ = [
    "ByzParams",
    "Engine",
    "SweepSpec",
    "Transcript",
    "exhaustive_check",
    "fit_scaling",
    "run_byz_trial",
    "run_crash_trial",
    "run_sweep",
    "summarize",
]
