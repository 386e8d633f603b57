"""Canonical JSON/CSV/table rendering of closed-form and simulation reports.

Floats are written with ``repr`` (shortest round-trip form) and dict keys
keep insertion order, so re-parsing and re-rendering reproduces the bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Iterable, Optional, Sequence

from .analytic import ClosedFormReport
from .core import DiscrepancyRow
from .montecarlo import Estimate, SimulationReport, Verdict, oracle_z


def _num(x: Optional[float]) -> Optional[float]:
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def estimate_dict(est: Optional[Estimate]) -> Optional[dict]:
    if est is None:
        return None
    return {
        "mean": est.mean,
        "std_error": est.std_error,
        "n": est.n,
        "ci95_low": est.ci95_low,
        "ci95_high": est.ci95_high,
    }


def row_dict(row: DiscrepancyRow) -> dict:
    return {
        "a": row.a,
        "lo": row.lo,
        "hi": row.hi,
        "kind": "bin" if row.is_bin else "level",
        "n_conditional": row.n_conditional,
        "n_rejected": row.n_rejected,
        "cond_rate": row.cond_rate,
        "d_a": row.d_a,
        "r_a": row.r_a,
    }


def closed_form_dict(cf: Optional[ClosedFormReport]) -> Optional[dict]:
    if cf is None:
        return None
    return {
        "derivation_id": cf.derivation_id,
        "conditional_rates": [
            {"a": a, "cond_rate": rate, "d_a": rate - a, "r_a": rate / a} for a, rate in cf.conditional_rates.items()
        ],
        "expected_ratio": cf.expected_ratio,
        "diverges": cf.diverges,
        "note": cf.note,
    }


def verdict_dict(v: Verdict) -> dict:
    return {"verdict": v.label, "margin": v.margin, "threshold": v.threshold, "z_slack": v.z_slack}


def simulation_dict(report: SimulationReport) -> dict:
    z = oracle_z(report)
    return {
        "config": report.config.to_dict(),
        "expected_ratio": estimate_dict(report.expected_ratio),
        "overall_rejection_rate": estimate_dict(report.overall_rejection_rate),
        "e_value_mean": estimate_dict(report.e_value_mean),
        "max_ratio_term": report.max_ratio_term,
        "tail_warning": report.tail_warning,
        "binned_rows": report.binned,
        "rows": [row_dict(r) for r in report.rows],
        "analytic_reference": closed_form_dict(report.analytic_reference),
        "oracle_z": _num(z),
    }


def to_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def parse_csv_value(text: str) -> Any:
    """Inverse of the cell formatting used by :func:`to_csv`."""
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_csv(text: str) -> tuple[list[str], list[list[Any]]]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    return header, [[parse_csv_value(c) for c in row] for row in reader]


def table(header: Sequence[str], rows: Iterable[Sequence[Any]], digits: int = 6) -> str:
    cells = [[_short(v, digits) for v in row] for row in rows]
    widths = [max([len(h)] + [len(r[i]) for r in cells]) for i, h in enumerate(header)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join(lines) + "\n"


def _short(v: Any, digits: int = 6) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return f"{v:.{digits}g}"
    return str(v)


ROW_HEADER = ["a", "lo", "hi", "n_conditional", "n_rejected", "cond_rate", "d_a", "r_a"]


def row_values(row: DiscrepancyRow) -> list:
    return [row.a, row.lo, row.hi, row.n_conditional, row.n_rejected, row.cond_rate, row.d_a, row.r_a]


def fmt_estimate(est: Estimate) -> str:
    return f"{est.mean:.6g} +/- {est.std_error:.3g} (95% CI {est.ci95_low:.6g} .. {est.ci95_high:.6g}, n={est.n})"
