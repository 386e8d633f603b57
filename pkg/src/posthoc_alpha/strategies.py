"""Policies that pick a significance level after seeing the p-value.

Each strategy maps p to alpha deterministically.  ``select`` accepts a float
or a numpy array; scalar calls go through the same vectorised code so the
two paths cannot drift apart.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import Alpha, ValidationError


class StrategyParseError(ValueError):
    """A strategy string does not follow the ``kind:params`` grammar."""

    def __init__(self, message: str, token: str):
        super().__init__(f"{message}: {token!r}")
        self.token = token


@dataclass(frozen=True)
class Interval:
    """Closed interval of reachable alphas (continuum strategies)."""

    lo: float
    hi: float


def _level(x: float, name: str) -> float:
    try:
        return float(Alpha(x))
    except ValidationError as exc:
        raise ValidationError(f"{name}: {exc}") from None


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class Fixed:
    a: float

    def __post_init__(self):
        object.__setattr__(self, "a", _level(self.a, "fixed level"))

    def select(self, p):
        return _result(np.full(np.shape(p), self.a), p)

    def reachable(self) -> list[float]:
        return [self.a]

    def __str__(self) -> str:
        return f"fixed:{_fmt(self.a)}"


@dataclass(frozen=True)
class TwoThreshold:
    a1: float
    a2: float

    def __post_init__(self):
        a1, a2 = _level(self.a1, "a1"), _level(self.a2, "a2")
        if not a1 < a2:
            raise ValidationError(f"two-threshold strategy needs a1 < a2, got a1={a1!r}, a2={a2!r}")
        object.__setattr__(self, "a1", a1)
        object.__setattr__(self, "a2", a2)

    def select(self, p):
        return _result(np.where(np.asarray(p) <= self.a1, self.a1, self.a2), p)

    def reachable(self) -> list[float]:
        return [self.a1, self.a2]

    def __str__(self) -> str:
        return f"two:{_fmt(self.a1)},{_fmt(self.a2)}"


@dataclass(frozen=True)
class StepGreedy:
    """Smallest listed threshold that still rejects; the largest one otherwise."""

    thresholds: tuple[float, ...]

    def __post_init__(self):
        ts = tuple(_level(t, "threshold") for t in self.thresholds)
        if not ts:
            raise ValidationError("step strategy needs at least one threshold")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValidationError(f"step thresholds must be strictly increasing, got {ts}")
        object.__setattr__(self, "thresholds", ts)

    def select(self, p):
        ts = np.asarray(self.thresholds)
        idx = np.searchsorted(ts, np.asarray(p), side="left")
        return _result(ts[np.minimum(idx, len(ts) - 1)], p)

    def reachable(self) -> list[float]:
        return list(self.thresholds)

    def __str__(self) -> str:
        return "step:" + ",".join(_fmt(t) for t in self.thresholds)


@dataclass(frozen=True)
class ContinuumGreedy:
    """alpha = p for p <= cap, alpha = cap above it, floored at ``floor_eps``.

    ``floor_eps = 0`` is allowed only for closed-form work, where it stands
    for the unfloored (divergent) rule; simulation refuses it.
    """

    cap: float
    floor_eps: float

    def __post_init__(self):
        cap = _level(self.cap, "cap C")
        eps = float(self.floor_eps)
        if not 0.0 <= eps <= cap:
            raise ValidationError(f"floor eps must satisfy 0 <= eps <= C, got eps={eps!r}, C={cap!r}")
        object.__setattr__(self, "cap", cap)
        object.__setattr__(self, "floor_eps", eps)

    @property
    def unfloored(self) -> bool:
        return self.floor_eps == 0.0

    def select(self, p):
        if self.unfloored:
            raise ValidationError("the unfloored continuum rule (eps=0) is analytic-only")
        p_arr = np.asarray(p, dtype=np.float64)
        alpha = np.where(p_arr <= self.cap, np.maximum(self.floor_eps, p_arr), self.cap)
        return _result(alpha, p)

    def reachable(self) -> Interval:
        return Interval(self.floor_eps, self.cap)

    def __str__(self) -> str:
        return f"cont:{_fmt(self.cap)},{_fmt(self.floor_eps)}"


Strategy = Union[Fixed, TwoThreshold, StepGreedy, ContinuumGreedy]


def _result(alpha: np.ndarray, p):
    if np.ndim(p) == 0:
        return Alpha(float(alpha))
    return np.asarray(alpha, dtype=np.float64)


def select_alpha(spec: Strategy, p):
    """Level chosen by ``spec`` after observing ``p`` (float or array)."""
    return spec.select(p)


def reachable_alphas(spec: Strategy):
    """Finite list of reachable levels, or an :class:`Interval` for continuum rules."""
    return spec.reachable()


_NUMBER = re.compile(r"^[+]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def _numbers(body: str, raw: str) -> list[float]:
    if not body:
        raise StrategyParseError("missing parameters", raw)
    out = []
    for tok in body.split(","):
        tok = tok.strip()
        if not _NUMBER.match(tok):
            raise StrategyParseError("not a decimal number", tok)
        out.append(float(tok))
    return out


def parse_strategy(text: str) -> Strategy:
    """Parse ``fixed:<a>``, ``two:<a1>,<a2>``, ``step:<a1>,...`` or ``cont:<C>,<eps>``."""
    kind, sep, body = text.strip().partition(":")
    if not sep:
        raise StrategyParseError("expected '<kind>:<params>'", text)
    kind = kind.strip().lower()
    if kind not in ("fixed", "two", "step", "cont"):
        raise StrategyParseError("unknown strategy kind", kind)
    nums = _numbers(body.strip(), text)
    arity = {"fixed": 1, "two": 2, "cont": 2}
    if kind in arity and len(nums) != arity[kind]:
        raise StrategyParseError(f"'{kind}' takes {arity[kind]} parameter(s)", body)
    if kind == "fixed":
        return Fixed(nums[0])
    if kind == "two":
        return TwoThreshold(*nums)
    if kind == "step":
        return StepGreedy(tuple(nums))
    return ContinuumGreedy(*nums)
