"""Closed-form null behaviour of each strategy under exactly uniform p-values."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

from .core import Alpha, ValidationError
from .strategies import ContinuumGreedy, Fixed, StepGreedy, Strategy, TwoThreshold

FIXED = "Fixed"
TWO_THRESHOLD = "TwoThreshold"
STEP_GREEDY = "StepGreedy"
CONTINUUM_TRUNCATED = "ContinuumTruncated"
CONTINUUM_LIMIT = "ContinuumLimit"


@dataclass(frozen=True)
class ClosedFormReport:
    """Exact conditional rates per reachable level and the expected ratio.

    ``expected_ratio`` is ``None`` exactly when ``diverges`` is set; the
    divergent case is never represented by a float infinity.
    """

    derivation_id: str
    conditional_rates: dict = field(default_factory=dict)
    expected_ratio: Optional[float] = None
    diverges: bool = False
    note: str = ""

    def __post_init__(self):
        if self.diverges != (self.expected_ratio is None):
            raise ValidationError("expected_ratio must be None iff the report diverges")


def _levels(a1: float, a2: float) -> tuple[float, float]:
    return float(Alpha(a1)), float(Alpha(a2))


def two_threshold_conditional_rates(a1: float, a2: float) -> tuple[float, float]:
    """(P(reject | alpha=a1), P(reject | alpha=a2)) = (1, (a2-a1)/(1-a1))."""
    a1, a2 = _levels(a1, a2)
    if a1 >= a2:
        raise ValidationError(f"two-threshold strategy needs a1 < a2, got a1={a1!r}, a2={a2!r}")
    return 1.0, (a2 - a1) / (1.0 - a1)


def two_threshold_expected_ratio(a1: float, a2: float) -> float:
    a1, a2 = _levels(a1, a2)
    if a1 > a2:
        raise ValidationError(f"two-threshold strategy needs a1 <= a2, got a1={a1!r}, a2={a2!r}")
    if a1 == a2:
        warnings.warn("a1 == a2: two-threshold rule collapses to a fixed level", stacklevel=2)
        return 1.0
    return 1.0 + (a2 - a1) / a2


def continuum_truncated_expected_ratio(cap: float, floor_eps: float) -> float:
    """1 + ln(C/eps).

    The atom below the floor (mass eps, ratio 1/eps) contributes 1 and the
    alpha = p stretch contributes the integral of 1/x over [eps, C].
    """
    cap = float(Alpha(cap))
    floor_eps = float(floor_eps)
    if not 0.0 < floor_eps <= cap:
        raise ValidationError(f"floor eps must satisfy 0 < eps <= C, got eps={floor_eps!r}, C={cap!r}")
    return 1.0 + math.log(cap / floor_eps)


def fixed_alpha_expected_ratio(a: float) -> float:
    Alpha(a)
    return 1.0


def step_greedy_expected_ratio(thresholds) -> float:
    """Sum over steps of (t_j - t_{j-1}) / t_j with t_0 = 0."""
    ts = StepGreedy(tuple(thresholds)).thresholds
    prev = 0.0
    terms = []
    for t in ts:
        terms.append((t - prev) / t)
        prev = t
    return math.fsum(terms)


def closed_form(spec: Strategy) -> ClosedFormReport:
    """Exact report for ``spec`` under the exact-uniform null."""
    if isinstance(spec, Fixed):
        return ClosedFormReport(FIXED, {spec.a: spec.a}, fixed_alpha_expected_ratio(spec.a))
    if isinstance(spec, TwoThreshold):
        r1, r2 = two_threshold_conditional_rates(spec.a1, spec.a2)
        return ClosedFormReport(
            TWO_THRESHOLD, {spec.a1: r1, spec.a2: r2}, two_threshold_expected_ratio(spec.a1, spec.a2)
        )
    if isinstance(spec, StepGreedy):
        ts = spec.thresholds
        if len(ts) == 1:
            return closed_form(Fixed(ts[0]))
        rates = {t: 1.0 for t in ts[:-1]}
        rates[ts[-1]] = (ts[-1] - ts[-2]) / (1.0 - ts[-2])
        return ClosedFormReport(STEP_GREEDY, rates, step_greedy_expected_ratio(ts))
    if isinstance(spec, ContinuumGreedy):
        note = "rate is 1 for every level a < C (r_a = 1/a); rate given alpha = C is 0"
        if spec.unfloored:
            return ClosedFormReport(
                CONTINUUM_LIMIT,
                {spec.cap: 0.0},
                None,
                diverges=True,
                note=note + "; truncated value 1 + ln(C/eps) grows without bound as eps -> 0",
            )
        if spec.floor_eps == spec.cap:
            rates = {spec.cap: spec.cap}
        else:
            rates = {spec.floor_eps: 1.0, spec.cap: 0.0}
        return ClosedFormReport(
            CONTINUUM_TRUNCATED,
            rates,
            continuum_truncated_expected_ratio(spec.cap, spec.floor_eps),
            note=note,
        )
    raise TypeError(f"unsupported strategy {spec!r}")
