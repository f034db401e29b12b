from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Check:
    """One numerical consistency check.

    ``value`` is a deviation that must not exceed ``tolerance`` unless
    ``passed`` is given explicitly (used for inequality-type checks).
    """

    equation: str
    description: str
    value: float
    tolerance: float
    passed: bool

    @classmethod
    def deviation(cls, equation: str, description: str, value: float, tolerance: float) -> Check:
        value = float(value)
        return cls(equation, description, value, tolerance, value <= tolerance)


class ConsistencyError(RuntimeError):
    """A protocol stage failed one of its checks."""

    def __init__(self, check: Check, trace=None):
        super().__init__(
            f"check {check.equation} failed: {check.description} "
            f"(value {check.value:.3e}, tolerance {check.tolerance:.1e})"
        )
        self.check = check
        self.trace = trace


def first_failure(checks) -> Check | None:
    for c in checks:
        if not c.passed:
            return c
    return None
