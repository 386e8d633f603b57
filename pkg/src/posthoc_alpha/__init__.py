"""Simulate and compute type-I error when the significance level is picked after the p-value."""

__version__ = "0.1.0"

from .analytic import (
    ClosedFormReport,
    closed_form,
    continuum_truncated_expected_ratio,
    fixed_alpha_expected_ratio,
    two_threshold_conditional_rates,
    two_threshold_expected_ratio,
)
from .core import Alpha, DiscrepancyRow, EValue, PValue, TrialRecord, ValidationError, reject
from .evidence import EvidenceModel, calibrate_to_p, draw_null_p, likelihood_ratio_e
from .montecarlo import (
    Estimate,
    SimulationConfig,
    SimulationReport,
    Verdict,
    conditional_rate_table,
    run_simulation,
    verify_post_hoc_validity,
)
from .rng import CounterRNG, TrialStream
from .strategies import (
    ContinuumGreedy,
    Fixed,
    StepGreedy,
    TwoThreshold,
    parse_strategy,
    reachable_alphas,
    select_alpha,
)
