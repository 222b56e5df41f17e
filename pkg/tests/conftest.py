"""Shared fixtures: cached expensive runs and the acceptance report."""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import pytest

from qevap import experiments as X

CRITERIA = OrderedDict([
    (1, "barrier baseline (TDSE, monochromatic, classical)"),
    (2, "kick at 0 vs kick at t0"),
    (3, "kick-time sweep Gaussian"),
    (4, "T(q) symmetry, quadratic law, sign dependence"),
    (5, "energy laws"),
    (6, "analytic vs oracle and vs TDSE"),
    (7, "gradual kick"),
    (8, "numerics quality"),
    (9, "helium prediction"),
    (10, "property suites"),
])


@dataclass
class Criterion:
    number: int
    checks: list = field(default_factory=list)

    def check(self, name: str, ok: bool, detail: str = "") -> bool:
        self.checks.append((name, bool(ok), detail))
        return bool(ok)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(ok for _, ok, _ in self.checks)

    def failures(self) -> list[str]:
        return [f"{n}: {d}" for n, ok, d in self.checks if not ok]


REPORT: "OrderedDict[int, Criterion]" = OrderedDict()


@pytest.fixture
def criterion(request):
    def make(number: int) -> Criterion:
        c = Criterion(number)
        REPORT[number] = c
        return c
    return make


def pytest_terminal_summary(terminalreporter):
    if not REPORT:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        c = REPORT.get(n)
        if c is None:
            continue
        tr.write_line(f"criterion {n:>2} {'PASS' if c.passed else 'FAIL'}  {title}")
        for name, ok, detail in c.checks:
            tr.write_line(f"    [{'ok' if ok else 'xx'}] {name}: {detail}")


# ---------------------------------------------------------------- cached runs

@pytest.fixture(scope="session")
def fig1():
    return X.run_fig1_scenarios()


@pytest.fixture(scope="session")
def sweep_a():
    return X.sweep_q("a")


@pytest.fixture(scope="session")
def sweep_b():
    return X.sweep_q("b")


@pytest.fixture(scope="session")
def sweep_c():
    return X.sweep_q("c")


@pytest.fixture(scope="session")
def kick_time_sweep():
    return X.sweep_kick_time()


@pytest.fixture(scope="session")
def helium():
    return X.helium_scenario()
