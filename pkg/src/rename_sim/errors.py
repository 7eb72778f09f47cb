"""Exception types shared across the simulator."""

from __future__ import annotations


class ConfigError(ValueError):
    """A trial or sweep configuration violates a precondition."""


class EncodeError(ValueError):
    """A message field does not fit its declared bit width."""


class DegenerateIntervalError(ValueError):
    """Raised when halving an interval that contains a single value."""


class NotMemberError(ValueError):
    """Raised when ranking a value that is absent from the candidate set."""


class MonitorViolation(AssertionError):
    """A deterministic runtime monitor failed; the trial is aborted."""

    def __init__(self, monitor: str, detail: str):
        self.monitor = monitor
        self.detail = detail
        super().__init__(f"{monitor}: {detail}")


class TimeoutError_(RuntimeError):
    """A node did not gather the messages it needs within the round budget."""


class BudgetExceeded(RuntimeError):
    """The exhaustive oracle exceeded its configured state budget."""


class InsufficientData(ValueError):
    """Not enough distinct data points to fit a scaling model."""
