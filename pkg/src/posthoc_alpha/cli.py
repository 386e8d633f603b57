"""Command-line entry point: ``posthoc-alpha {exact,simulate,compare,sweep}``.

Exit codes: 0 success, 2 usage or configuration error, 3 Monte-Carlo
estimate disagrees with the closed form by more than 6 standard errors.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import math
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analytic import closed_form
from .core import ValidationError
from .evidence import CALIBRATED_E, DEFAULT_DELTA, EXACT_UNIFORM, GAUSSIAN_Z, EvidenceModel
from .montecarlo import (
    DEFAULT_TRIALS,
    SimulationConfig,
    oracle_z,
    run_simulation,
    verify_post_hoc_validity,
)
from .report import (
    ROW_HEADER,
    closed_form_dict,
    fmt_estimate,
    row_values,
    simulation_dict,
    table,
    to_csv,
    to_json,
    verdict_dict,
)
from .strategies import ContinuumGreedy, StrategyParseError, TwoThreshold, parse_strategy

log = logging.getLogger("posthoc_alpha")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ORACLE = 3
ORACLE_LIMIT = 6.0
WORKERS_ENV = "POSTHOC_ALPHA_WORKERS"


class UsageError(Exception):
    pass


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _seed(text: str) -> int:
    try:
        seed = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return seed


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _manifest(args: argparse.Namespace, argv: Sequence[str], config: dict) -> None:
    if not getattr(args, "manifest", None):
        return
    doc = {
        "argv": list(argv),
        "config": config,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "seed": getattr(args, "seed", None),
    }
    with open(args.manifest, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(to_json(doc))


# exact -----------------------------------------------------------------------


def cmd_exact(args: argparse.Namespace, argv: Sequence[str]) -> int:
    spec = parse_strategy(args.strategy)
    cf = closed_form(spec)
    _manifest(args, argv, {"strategy": str(spec)})
    if args.format == "json":
        _emit(to_json({"strategy": str(spec), **closed_form_dict(cf)}), args.out)
        return EXIT_OK
    rows = [[a, rate, rate - a, rate / a] for a, rate in cf.conditional_rates.items()]
    if args.format == "csv":
        header = ["strategy", "derivation_id", "a", "cond_rate", "d_a", "r_a", "expected_ratio", "diverges"]
        _emit(to_csv(header, [[str(spec), cf.derivation_id, *r, cf.expected_ratio, cf.diverges] for r in rows]), args.out)
        return EXIT_OK
    lines = [f"strategy: {spec}  ({cf.derivation_id})", table(["a", "cond_rate", "d_a", "r_a"], rows, digits=12).rstrip()]
    if cf.note:
        lines.append(f"note: {cf.note}")
    if cf.diverges:
        lines.append("E r_alpha = DIVERGES (∞); truncated at floor eps: 1 + ln(C/eps)")
    else:
        lines.append(f"E r_alpha = {cf.expected_ratio!r}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


# simulate --------------------------------------------------------------------


def _evidence(kind: str, delta: float) -> EvidenceModel:
    return EvidenceModel(kind, delta)


def _bin_edges(args: argparse.Namespace, spec) -> Optional[tuple[float, ...]]:
    if args.bin_edges is not None:
        return tuple(args.bin_edges)
    if args.bins is not None:
        if not isinstance(spec, ContinuumGreedy):
            raise ValidationError("--bins only applies to continuum strategies")
        if args.bins < 1:
            raise ValidationError("--bins must be >= 1")
        edges = np.geomspace(spec.floor_eps, spec.cap, args.bins + 1)
        edges[0], edges[-1] = spec.floor_eps, spec.cap
        return tuple(float(x) for x in edges)
    return None


def _config(args, spec, evidence: EvidenceModel, bin_edges=None) -> SimulationConfig:
    workers = args.workers if args.workers is not None else default_workers()
    return SimulationConfig(spec, evidence, args.n, args.seed, bin_edges, workers)


def _simulation_text(report) -> str:
    cfg = report.config
    lines = [
        f"strategy: {cfg.strategy}  evidence: {cfg.evidence.kind}  n={cfg.n_trials}  seed={cfg.seed}",
        f"E r_alpha: {fmt_estimate(report.expected_ratio)}",
        f"overall rejection rate: {fmt_estimate(report.overall_rejection_rate)}",
    ]
    if report.e_value_mean is not None:
        lines.append(f"mean e-value: {fmt_estimate(report.e_value_mean)}")
    if report.tail_warning:
        lines.append(f"WARNING: heavy tail, max phi/alpha = {report.max_ratio_term:.6g} dominates the mean")
    if report.binned:
        lines.append("rows with lo < hi are bins of alpha (a = geometric midpoint)")
    lines.append(table(ROW_HEADER, [row_values(r) for r in report.rows]).rstrip())
    return "\n".join(lines) + "\n"


def _oracle_line(report) -> tuple[Optional[str], int]:
    z = oracle_z(report)
    if z is None:
        return None, EXIT_OK
    ref = report.analytic_reference.expected_ratio
    status = "ok" if z <= ORACLE_LIMIT else "FAILED"
    line = f"oracle agreement: closed form {ref!r}, |delta| = {z:.3g} SE ({status})"
    return line, EXIT_OK if z <= ORACLE_LIMIT else EXIT_ORACLE


def cmd_simulate(args: argparse.Namespace, argv: Sequence[str]) -> int:
    spec = parse_strategy(args.strategy)
    config = _config(args, spec, _evidence(args.evidence, args.delta), _bin_edges(args, spec))
    _manifest(args, argv, config.to_dict())
    report = run_simulation(config)
    oracle, code = _oracle_line(report)
    if args.format == "json":
        _emit(to_json(simulation_dict(report)), args.out)
    elif args.format == "csv":
        header = ["strategy", "evidence", *ROW_HEADER, "expected_ratio", "expected_ratio_se"]
        est = report.expected_ratio
        rows = [[str(spec), config.evidence.kind, *row_values(r), est.mean, est.std_error] for r in report.rows]
        _emit(to_csv(header, rows), args.out)
    else:
        text = _simulation_text(report)
        if oracle:
            text += oracle + "\n"
        _emit(text, args.out)
    if oracle and args.format != "table":
        print(oracle, file=sys.stderr)
    return code


# compare ---------------------------------------------------------------------


def run_compare(spec, delta: float, n: int, seed: int, workers: int = 1):
    """Same strategy on raw one-sided p and on p* = min(1, 1/e), sharing the Z draws."""
    raw = run_simulation(SimulationConfig(spec, EvidenceModel.gaussian_z(delta), n, seed, None, workers))
    cal = run_simulation(SimulationConfig(spec, EvidenceModel.calibrated_e(delta), n, seed, None, workers))
    return raw, cal, verify_post_hoc_validity(raw), verify_post_hoc_validity(cal)


def cmd_compare(args: argparse.Namespace, argv: Sequence[str]) -> int:
    spec = parse_strategy(args.strategy)
    workers = args.workers if args.workers is not None else default_workers()
    _manifest(args, argv, {"strategy": str(spec), "delta": args.delta, "n_trials": args.n, "seed": args.seed})
    raw, cal, v_raw, v_cal = run_compare(spec, args.delta, args.n, args.seed, workers)
    if args.format == "json":
        doc = {
            "strategy": str(spec),
            "delta": args.delta,
            "raw": simulation_dict(raw),
            "calibrated": simulation_dict(cal),
            "verdicts": {"raw": verdict_dict(v_raw), "calibrated": verdict_dict(v_cal)},
        }
        _emit(to_json(doc), args.out)
        return EXIT_OK
    header = ["arm", "mean", "std_error", "ci95_low", "ci95_high", "verdict", "margin", "threshold"]
    rows = []
    for arm, rep, v in (("raw_p", raw, v_raw), ("calibrated_p_star", cal, v_cal)):
        e = rep.expected_ratio
        rows.append([arm, e.mean, e.std_error, e.ci95_low, e.ci95_high, v.label, v.margin, v.threshold])
    if args.format == "csv":
        _emit(to_csv(header, rows), args.out)
    else:
        head = f"strategy: {spec}  delta={args.delta!r}  n={args.n}  seed={args.seed}\n"
        _emit(head + table(header, rows), args.out)
    return EXIT_OK


# sweep -----------------------------------------------------------------------

SWEEP_BASE = {"eps": "cont:0.05,1e-4", "a1": "two:0.005,0.05", "delta": "cont:0.05,1e-4"}


def sweep_grid(args: argparse.Namespace) -> list[float]:
    if args.grid is not None:
        grid = list(args.grid)
    elif args.geom is not None or args.lin is not None:
        start, stop, num = args.geom if args.geom is not None else args.lin
        if num != int(num):
            raise UsageError("grid point count must be an integer")
        maker = np.geomspace if args.geom is not None else np.linspace
        grid = [float(x) for x in maker(start, stop, int(num))]
    else:
        raise UsageError("sweep needs one of --grid, --geom or --lin")
    if len(grid) < 2:
        raise UsageError("sweep grid needs at least 2 points")
    return grid


def sweep_point(axis: str, base, value: float):
    """(strategy, evidence) for one grid value."""
    if axis == "eps":
        if not isinstance(base, ContinuumGreedy):
            raise ValidationError("eps sweep needs a cont:<C>,<eps> base strategy")
        return ContinuumGreedy(base.cap, value), EvidenceModel.exact_uniform()
    if axis == "a1":
        if not isinstance(base, TwoThreshold):
            raise ValidationError("a1 sweep needs a two:<a1>,<a2> base strategy")
        return TwoThreshold(value, base.a2), EvidenceModel.exact_uniform()
    return base, EvidenceModel.calibrated_e(value)


def cmd_sweep(args: argparse.Namespace, argv: Sequence[str]) -> int:
    base = parse_strategy(args.strategy or SWEEP_BASE[args.axis])
    grid = sweep_grid(args)
    workers = args.workers if args.workers is not None else default_workers()
    _manifest(args, argv, {"axis": args.axis, "grid": grid, "strategy": str(base), "n_trials": args.n, "seed": args.seed})
    header = [
        "axis", "value", "strategy", "evidence", "n_trials", "seed",
        "mean", "std_error", "ci95_low", "ci95_high", "closed_form", "z_vs_closed_form", "post_hoc_valid",
    ]
    rows = []
    code = EXIT_OK
    for value in grid:
        spec, ev = sweep_point(args.axis, base, value)
        report = run_simulation(SimulationConfig(spec, ev, args.n, args.seed, None, workers))
        z = oracle_z(report)
        cf = report.analytic_reference.expected_ratio if report.analytic_reference else None
        if z is not None and z > ORACLE_LIMIT:
            log.error("oracle disagreement at %s=%r: %.3g SE", args.axis, value, z)
            code = EXIT_ORACLE
        e = report.expected_ratio
        valid = verify_post_hoc_validity(report).valid
        z_out = z if z is not None and math.isfinite(z) else None
        rows.append([args.axis, value, str(spec), ev.kind, args.n, args.seed,
                     e.mean, e.std_error, e.ci95_low, e.ci95_high, cf, z_out, valid])
    if args.format == "json":
        _emit(to_json([dict(zip(header, r)) for r in rows]), args.out)
    elif args.format == "table":
        _emit(table(header, rows), args.out)
    else:
        _emit(to_csv(header, rows), args.out)
    return code


# parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posthoc-alpha",
        description="Type-I error under significance levels chosen after seeing the p-value.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_format="table", simulate=True):
        p.add_argument("--format", choices=("table", "json", "csv"), default=default_format)
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--manifest", help="write a JSON run manifest to this path")
        if simulate:
            p.add_argument("--n", type=int, default=DEFAULT_TRIALS, help="number of simulated trials")
            p.add_argument("--seed", type=_seed, default=0)
            p.add_argument("--workers", type=int, default=None, help=f"threads (default: ${WORKERS_ENV} or CPU count)")

    p = sub.add_parser("exact", help="closed-form rates and expected ratio")
    p.add_argument("strategy", help="fixed:<a> | two:<a1>,<a2> | step:<a1>,...,<ak> | cont:<C>,<eps>")
    common(p, simulate=False)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("simulate", help="Monte-Carlo run under the null")
    p.add_argument("--strategy", required=True)
    p.add_argument("--evidence", choices=(EXACT_UNIFORM, GAUSSIAN_Z, CALIBRATED_E), default=EXACT_UNIFORM)
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA, help="alternative mean shift for e-values")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--bins", type=int, help="geometric bins between eps and C (continuum only)")
    group.add_argument("--bin-edges", type=_float_list, help="explicit comma-separated bin edges")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="raw p versus calibrated p* under the same strategy")
    p.add_argument("--strategy", required=True)
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="expected ratio along a parameter grid (CSV)")
    p.add_argument("--axis", choices=("eps", "a1", "delta"), required=True)
    p.add_argument("--strategy", help="base strategy (default depends on axis)")
    grid = p.add_mutually_exclusive_group()
    grid.add_argument("--grid", type=_float_list, help="explicit comma-separated values")
    grid.add_argument("--geom", type=_float_list, help="START,STOP,NUM geometric grid")
    grid.add_argument("--lin", type=_float_list, help="START,STOP,NUM linear grid")
    common(p, default_format="csv")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for name in ("geom", "lin"):
        val = getattr(args, name, None)
        if val is not None and len(val) != 3:
            print(f"error: --{name} takes START,STOP,NUM", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args, argv)
    except StrategyParseError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, UsageError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
