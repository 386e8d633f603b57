import pytest

from posthoc_alpha.evidence import EvidenceModel
from posthoc_alpha.montecarlo import SimulationConfig


@pytest.fixture
def make_config():
    def _make(strategy, n=100_000, seed=0, evidence=None, **kw):
        return SimulationConfig(strategy, evidence or EvidenceModel.exact_uniform(), n, seed, **kw)

    return _make


def binomial_se(p, n):
    return (p * (1 - p) / n) ** 0.5


ACCEPTANCE = {}


def record(criterion, ok, detail):
    ACCEPTANCE[criterion] = (ok, detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")
