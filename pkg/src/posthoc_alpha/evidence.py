"""Null-distribution p-values, likelihood-ratio e-values and the 1/e calibrator."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr, ndtri

from .core import EValue, PValue, ValidationError
from .rng import CounterRNG, TrialStream

EXACT_UNIFORM = "uniform"
GAUSSIAN_Z = "gaussian"
CALIBRATED_E = "e"
KINDS = (EXACT_UNIFORM, GAUSSIAN_Z, CALIBRATED_E)

DEFAULT_DELTA = 0.5


class EValueOverflow(ArithmeticError):
    def __init__(self, z: float, delta: float):
        super().__init__(f"likelihood ratio overflows for z={z!r}, delta={delta!r}")
        self.z = z
        self.delta = delta


@dataclass(frozen=True)
class EvidenceModel:
    """How a trial's evidence is generated under the null.

    ``uniform`` draws p directly; ``gaussian`` draws Z ~ N(0, 1) and reports
    the one-sided p = 1 - Phi(Z); ``e`` draws the same Z, forms the
    N(delta, 1) vs N(0, 1) likelihood ratio and hands on p* = min(1, 1/e).
    """

    kind: str = EXACT_UNIFORM
    delta: float = DEFAULT_DELTA

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValidationError(f"unknown evidence kind {self.kind!r}; expected one of {KINDS}")
        if not math.isfinite(self.delta) or self.delta < 0:
            raise ValidationError(f"delta must be finite and >= 0, got {self.delta!r}")
        if self.kind == CALIBRATED_E and self.delta == 0:
            raise ValidationError("calibrated e-values need delta > 0")

    @classmethod
    def exact_uniform(cls) -> "EvidenceModel":
        return cls(EXACT_UNIFORM)

    @classmethod
    def gaussian_z(cls, delta: float = DEFAULT_DELTA) -> "EvidenceModel":
        return cls(GAUSSIAN_Z, delta)

    @classmethod
    def calibrated_e(cls, delta: float = DEFAULT_DELTA) -> "EvidenceModel":
        return cls(CALIBRATED_E, delta)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "delta": self.delta if self.kind != EXACT_UNIFORM else None}


def normal_sf(z):
    """Upper tail 1 - Phi(z), erfc-based so small tails keep full relative precision."""
    return ndtr(-np.asarray(z, dtype=np.float64))


def _check_p(p: float) -> PValue:
    if p == 0.0:
        raise RuntimeError("generator produced p == 0, violating the (0, 1] contract")
    return PValue(p)


def draw_null_p(model: EvidenceModel, stream: TrialStream) -> PValue:
    """Draw one p-value, uniform on (0, 1] under the null."""
    if model.kind == EXACT_UNIFORM:
        return _check_p(stream.uniform())
    if model.kind == GAUSSIAN_Z:
        z = float(ndtri(stream.open_uniform()))
        return _check_p(float(normal_sf(z)))
    raise ValidationError("draw_null_p needs an 'uniform' or 'gaussian' evidence model")


def likelihood_ratio_e(z: float, delta: float) -> EValue:
    """Likelihood ratio of N(delta, 1) against N(0, 1) evaluated at ``z``."""
    if delta < 0 or not math.isfinite(delta):
        raise ValidationError(f"delta must be finite and >= 0, got {delta!r}")
    if not math.isfinite(z):
        raise ValidationError(f"z must be finite, got {z!r}")
    # np.exp keeps scalar and batch draws bit-identical
    with np.errstate(over="ignore"):
        e = float(np.exp(np.float64(delta * z - 0.5 * delta * delta)))
    if math.isinf(e):
        raise EValueOverflow(z, delta)
    return EValue(e)


def calibrate_to_p(e: float) -> PValue:
    """Conservative p-value min(1, 1/e); e = 0 maps to 1."""
    e = float(e)
    if e < 0:
        raise ValidationError(f"e-value must be >= 0, got {e!r}")
    if e <= 1.0:
        return PValue(1.0)
    return PValue(1.0 / e)


@dataclass
class EvidenceBatch:
    statistic: np.ndarray
    p: np.ndarray
    e: Optional[np.ndarray] = None


def draw_batch(model: EvidenceModel, rng: CounterRNG, start: int, stop: int) -> EvidenceBatch:
    """Evidence for trials ``start..stop-1``, identical to the per-trial scalar draws."""
    if model.kind == EXACT_UNIFORM:
        p = rng.uniform(start, stop)
        return EvidenceBatch(statistic=p, p=_checked(p))
    z = ndtri(rng.open_uniform(start, stop))
    if model.kind == GAUSSIAN_Z:
        return EvidenceBatch(statistic=z, p=_checked(normal_sf(z)))
    with np.errstate(over="ignore"):
        e = np.exp(model.delta * z - 0.5 * model.delta * model.delta)
    if not np.isfinite(e).all():
        bad = int(np.argmax(~np.isfinite(e)))
        raise EValueOverflow(float(z[bad]), model.delta)
    with np.errstate(divide="ignore"):
        p_star = np.where(e <= 1.0, 1.0, 1.0 / e)
    return EvidenceBatch(statistic=z, p=_checked(p_star), e=e)


def _checked(p: np.ndarray) -> np.ndarray:
    if p.size and p.min() <= 0.0:
        raise RuntimeError("generator produced p == 0, violating the (0, 1] contract")
    return p


def draw_trial(model: EvidenceModel, stream: TrialStream) -> tuple[float, PValue, Optional[EValue]]:
    """Scalar counterpart of :func:`draw_batch` for a single trial: (statistic, p, e)."""
    if model.kind == EXACT_UNIFORM:
        p = draw_null_p(model, stream)
        return float(p), p, None
    z = float(ndtri(stream.open_uniform()))
    if model.kind == GAUSSIAN_Z:
        return z, _check_p(float(normal_sf(z))), None
    e = likelihood_ratio_e(z, model.delta)
    return z, calibrate_to_p(e), e
