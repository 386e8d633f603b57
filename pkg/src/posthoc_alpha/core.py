"""Shared value types and the rejection rule."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional


class ValidationError(ValueError):
    """A parameter violates a documented constraint."""


class PValue(float):
    """A p-value in (0, 1]."""

    def __new__(cls, value: float) -> "PValue":
        value = float(value)
        if not (0.0 < value <= 1.0):
            raise ValidationError(f"p-value must lie in (0, 1], got {value!r}")
        return super().__new__(cls, value)

    @property
    def value(self) -> float:
        return float(self)


class Alpha(float):
    """A significance level in (0, 1]."""

    def __new__(cls, value: float) -> "Alpha":
        value = float(value)
        if not (0.0 < value <= 1.0):
            raise ValidationError(f"significance level must lie in (0, 1], got {value!r}")
        return super().__new__(cls, value)

    @property
    def value(self) -> float:
        return float(self)


class EValue(float):
    """A finite, non-negative e-value."""

    def __new__(cls, value: float) -> "EValue":
        value = float(value)
        if not (value >= 0.0 and math.isfinite(value)):
            raise ValidationError(f"e-value must be finite and >= 0, got {value!r}")
        return super().__new__(cls, value)

    @property
    def value(self) -> float:
        return float(self)


def reject(p: float, alpha: float) -> bool:
    """Return True iff the null is rejected, i.e. ``p <= alpha`` (ties reject)."""
    return float(p) <= float(alpha)


@dataclass(frozen=True)
class TrialRecord:
    """One simulated study under the null."""

    statistic: float
    p: PValue
    alpha: Alpha
    rejected: bool
    ratio_term: float

    def __post_init__(self) -> None:
        if self.rejected != reject(self.p, self.alpha):
            raise ValidationError("rejected flag disagrees with p <= alpha")
        expected = 1.0 / self.alpha if self.rejected else 0.0
        if self.ratio_term != expected:
            raise ValidationError("ratio_term must be 1/alpha when rejected, else 0")

    @classmethod
    def decide(cls, statistic: float, p: float, alpha: float) -> "TrialRecord":
        p, alpha = PValue(p), Alpha(alpha)
        rejected = reject(p, alpha)
        return cls(statistic, p, alpha, rejected, 1.0 / alpha if rejected else 0.0)


@dataclass(frozen=True)
class DiscrepancyRow:
    """Conditional rejection summary for one alpha cell.

    ``a`` is the cell's representative level (the threshold itself for a
    point cell, the geometric midpoint for a bin).  ``lo``/``hi`` give the
    cell extent; they coincide for point cells.  Rate fields are ``None``
    when the cell received no trials.
    """

    a: float
    lo: float
    hi: float
    n_conditional: int
    n_rejected: int
    cond_rate: Optional[float]
    d_a: Optional[float]
    r_a: Optional[float]

    @property
    def is_bin(self) -> bool:
        return self.lo != self.hi

    @classmethod
    def from_counts(cls, a: float, lo: float, hi: float, n_conditional: int, n_rejected: int) -> "DiscrepancyRow":
        if n_conditional == 0:
            return cls(a, lo, hi, 0, 0, None, None, None)
        rate = n_rejected / n_conditional
        return cls(a, lo, hi, n_conditional, n_rejected, rate, rate - a, rate / a)
