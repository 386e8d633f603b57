"""Monte-Carlo estimation of conditional error rates and the expected ratio.

The expected discrepancy ratio is estimated as the plain trial average of
phi/alpha.  Conditional tallies per alpha cell are diagnostics on the side.

Trials are processed in fixed-size chunks.  Chunk boundaries and the merge
order depend only on ``n_trials``, so any number of workers produces the
same bits.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from .analytic import ClosedFormReport, closed_form
from .core import DiscrepancyRow, TrialRecord, ValidationError
from .evidence import CALIBRATED_E, EvidenceModel, draw_batch, draw_trial
from .rng import MASK64, CounterRNG, TrialStream
from .strategies import ContinuumGreedy, Strategy

CHUNK = 1 << 18
DEFAULT_TRIALS = 1_000_000
DEFAULT_BINS = 20
TAIL_FRACTION = 0.01


@dataclass(frozen=True)
class Cell:
    """A point level (lo == hi == a) or a bin [lo, hi) represented by ``a``."""

    a: float
    lo: float
    hi: float

    @classmethod
    def point(cls, a: float) -> "Cell":
        return cls(a, a, a)

    @classmethod
    def bin(cls, lo: float, hi: float) -> "Cell":
        return cls(math.sqrt(lo * hi), lo, hi)

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi


@dataclass(frozen=True)
class SimulationConfig:
    strategy: Strategy
    evidence: EvidenceModel = field(default_factory=EvidenceModel.exact_uniform)
    n_trials: int = DEFAULT_TRIALS
    seed: int = 0
    bin_edges: Optional[tuple[float, ...]] = None
    workers: int = 1

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValidationError(f"n_trials must be >= 1, got {self.n_trials}")
        if not 0 <= self.seed <= MASK64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")
        if isinstance(self.strategy, ContinuumGreedy) and self.strategy.unfloored:
            raise ValidationError("cannot simulate the unfloored continuum rule (eps=0); give eps > 0")
        if self.bin_edges is not None:
            edges = tuple(float(x) for x in self.bin_edges)
            if not isinstance(self.strategy, ContinuumGreedy):
                raise ValidationError("bin_edges only apply to continuum strategies")
            if len(edges) < 2:
                raise ValidationError("bin_edges needs at least two edges")
            if any(not 0.0 < x <= 1.0 for x in edges):
                raise ValidationError("bin_edges must lie in (0, 1]")
            if any(b <= a for a, b in zip(edges, edges[1:])):
                raise ValidationError("bin_edges must be strictly increasing")
            object.__setattr__(self, "bin_edges", edges)

    def to_dict(self) -> dict:
        # workers is left out on purpose: results do not depend on it
        return {
            "strategy": str(self.strategy),
            "evidence": self.evidence.to_dict(),
            "n_trials": self.n_trials,
            "seed": self.seed,
            "bin_edges": list(self.bin_edges) if self.bin_edges is not None else None,
        }


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    n: int
    ci95_low: float
    ci95_high: float

    @classmethod
    def from_moments(cls, mean: float, m2: float, n: int) -> "Estimate":
        sd = math.sqrt(m2 / (n - 1)) if n > 1 else 0.0
        se = sd / math.sqrt(n)
        return cls(mean, se, n, mean - 1.96 * se, mean + 1.96 * se)


@dataclass(frozen=True)
class SimulationReport:
    config: SimulationConfig
    expected_ratio: Estimate
    overall_rejection_rate: Estimate
    rows: list[DiscrepancyRow]
    max_ratio_term: float
    tail_warning: bool
    analytic_reference: Optional[ClosedFormReport] = None
    e_value_mean: Optional[Estimate] = None

    @property
    def binned(self) -> bool:
        return any(r.is_bin for r in self.rows)


@dataclass(frozen=True)
class Verdict:
    valid: bool
    margin: float
    threshold: float
    z_slack: float

    @property
    def label(self) -> str:
        return "valid" if self.valid else "violated"


def default_cells(strategy: Strategy, bin_edges: Optional[Sequence[float]] = None) -> list[Cell]:
    """Point cells for every level reached with positive probability, bins for the rest."""
    if not isinstance(strategy, ContinuumGreedy):
        return [Cell.point(a) for a in strategy.reachable()]
    eps, cap = strategy.floor_eps, strategy.cap
    if eps == cap:
        return [Cell.point(cap)]
    if bin_edges is None:
        bin_edges = np.geomspace(eps, cap, DEFAULT_BINS + 1)
        bin_edges[0], bin_edges[-1] = eps, cap
    edges = [float(x) for x in bin_edges]
    cells = [Cell.point(eps)]
    cells += [Cell.bin(lo, hi) for lo, hi in zip(edges, edges[1:])]
    cells.append(Cell.point(cap))
    return cells


def assign_cells(alpha: np.ndarray, cells: Sequence[Cell]) -> np.ndarray:
    """Index of the cell holding each alpha; point cells take precedence over bins."""
    idx = np.full(alpha.shape, -1, dtype=np.int64)
    bins = [(j, c) for j, c in enumerate(cells) if not c.is_point]
    if bins:
        los = np.array([c.lo for _, c in bins])
        his = np.array([c.hi for _, c in bins])
        ids = np.array([j for j, _ in bins])
        k = np.searchsorted(los, alpha, side="right") - 1
        kc = np.clip(k, 0, len(bins) - 1)
        last = kc == len(bins) - 1
        inside = (k >= 0) & ((alpha < his[kc]) | (last & (alpha <= his[kc])))
        idx[inside] = ids[kc[inside]]
    for j, c in enumerate(cells):
        if c.is_point:
            idx[alpha == c.a] = j
    if (idx < 0).any():
        bad = float(alpha[int(np.argmax(idx < 0))])
        raise ValidationError(f"alpha={bad!r} falls outside every cell; strategy and cells disagree")
    return idx


@dataclass
class _Partial:
    n: int
    ratio_sum: float
    ratio_m2: float
    max_term: float
    n_cond: np.ndarray
    n_rej: np.ndarray
    e_sum: float = 0.0
    e_m2: float = 0.0


def _run_chunk(config: SimulationConfig, cells: Sequence[Cell], start: int, stop: int) -> _Partial:
    batch = draw_batch(config.evidence, CounterRNG(config.seed), start, stop)
    alpha = config.strategy.select(batch.p)
    rejected = batch.p <= alpha
    terms = np.where(rejected, 1.0 / alpha, 0.0)
    n = stop - start
    ratio_sum = math.fsum(terms[rejected])
    mean = ratio_sum / n
    ratio_m2 = float(np.sum((terms - mean) ** 2))
    idx = assign_cells(alpha, cells)
    n_cond = np.bincount(idx, minlength=len(cells))
    n_rej = np.bincount(idx[rejected], minlength=len(cells))
    part = _Partial(n, ratio_sum, ratio_m2, float(terms.max()), n_cond, n_rej)
    if batch.e is not None:
        part.e_sum = math.fsum(batch.e)
        part.e_m2 = float(np.sum((batch.e - part.e_sum / n) ** 2))
    return part


def _merge_m2(parts: Sequence[_Partial], sum_attr: str, m2_attr: str) -> float:
    """Chan et al. pairwise combination of per-chunk second moments, in chunk order."""
    n, mean, m2 = 0, 0.0, 0.0
    for part in parts:
        nb = part.n
        mb = getattr(part, sum_attr) / nb
        delta = mb - mean
        tot = n + nb
        m2 = m2 + getattr(part, m2_attr) + delta * delta * n * nb / tot
        mean = mean + delta * nb / tot
        n = tot
    return m2


def run_simulation(config: SimulationConfig) -> SimulationReport:
    """Simulate ``config.n_trials`` null studies and summarise them."""
    cells = default_cells(config.strategy, config.bin_edges)
    bounds = [(s, min(s + CHUNK, config.n_trials)) for s in range(0, config.n_trials, CHUNK)]
    if config.workers == 1 or len(bounds) == 1:
        parts = [_run_chunk(config, cells, s, e) for s, e in bounds]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(lambda b: _run_chunk(config, cells, *b), bounds))

    n = config.n_trials
    ratio_mean = math.fsum(p.ratio_sum for p in parts) / n
    expected_ratio = Estimate.from_moments(ratio_mean, _merge_m2(parts, "ratio_sum", "ratio_m2"), n)
    n_cond = sum((p.n_cond for p in parts), np.zeros(len(cells), dtype=np.int64))
    n_rej = sum((p.n_rej for p in parts), np.zeros(len(cells), dtype=np.int64))
    rows = [
        DiscrepancyRow.from_counts(c.a, c.lo, c.hi, int(nc), int(nr)) for c, nc, nr in zip(cells, n_cond, n_rej)
    ]
    total_rej = int(n_rej.sum())
    rate = total_rej / n
    rejection = Estimate.from_moments(rate, total_rej * (1.0 - rate) ** 2 + (n - total_rej) * rate**2, n)
    max_term = max(p.max_term for p in parts)

    e_mean = None
    analytic = None
    if config.evidence.kind == CALIBRATED_E:
        e_mean = Estimate.from_moments(math.fsum(p.e_sum for p in parts) / n, _merge_m2(parts, "e_sum", "e_m2"), n)
    else:
        analytic = closed_form(config.strategy)

    return SimulationReport(
        config=config,
        expected_ratio=expected_ratio,
        overall_rejection_rate=rejection,
        rows=rows,
        max_ratio_term=max_term,
        tail_warning=max_term > TAIL_FRACTION * n,
        analytic_reference=analytic,
        e_value_mean=e_mean,
    )


def iter_trials(config: SimulationConfig, start: int = 0, stop: Optional[int] = None) -> Iterator[TrialRecord]:
    """Per-trial records from the scalar path; same substreams as :func:`run_simulation`."""
    stop = config.n_trials if stop is None else stop
    for i in range(start, stop):
        stat, p, _ = draw_trial(config.evidence, TrialStream(config.seed, i))
        yield TrialRecord.decide(stat, p, config.strategy.select(p))


def conditional_rate_table(records: Iterable[TrialRecord], cells: Sequence[Cell]) -> list[DiscrepancyRow]:
    """Tally records into ``cells`` and derive rate, d_a and r_a per cell."""
    alphas, rejected = [], []
    for rec in records:
        alphas.append(float(rec.alpha))
        rejected.append(rec.rejected)
    alpha = np.asarray(alphas, dtype=np.float64)
    rej = np.asarray(rejected, dtype=bool)
    idx = assign_cells(alpha, cells)
    n_cond = np.bincount(idx, minlength=len(cells))
    n_rej = np.bincount(idx[rej], minlength=len(cells))
    return [DiscrepancyRow.from_counts(c.a, c.lo, c.hi, int(nc), int(nr)) for c, nc, nr in zip(cells, n_cond, n_rej)]


def expected_ratio_from_rows(rows: Iterable[DiscrepancyRow], n_trials: int) -> float:
    """Recombine the table: sum over cells of P(cell) * rate / a."""
    return math.fsum(r.n_rejected / (n_trials * r.a) for r in rows if r.n_conditional)


def verify_post_hoc_validity(report: SimulationReport, z_slack: float = 3.0) -> Verdict:
    """Check the estimate against the bound E[phi/alpha] <= 1, allowing ``z_slack`` standard errors."""
    est = report.expected_ratio
    threshold = 1.0 + z_slack * est.std_error
    return Verdict(est.mean <= threshold, est.mean - 1.0, threshold, z_slack)


def oracle_z(report: SimulationReport) -> Optional[float]:
    """|estimate - closed form| in standard-error units, when a closed form exists."""
    ref = report.analytic_reference
    if ref is None or ref.expected_ratio is None:
        return None
    diff = abs(report.expected_ratio.mean - ref.expected_ratio)
    se = report.expected_ratio.std_error
    if se == 0.0:
        return 0.0 if diff <= 1e-12 else math.inf
    return diff / se
