from __future__ import annotations

import pytest

from klab.model import ModelParams
from klab.tw.waves import solve_wave

FIG7 = dict(a=1.61, b=0.6, m=0.5)
FIG9 = dict(b=0.5, m=0.45, eps=0.01)


@pytest.fixture(scope="session")
def stripe_fig9():
    return solve_wave("stripe", ModelParams(a=1.2, **FIG9))


@pytest.fixture(scope="session")
def gap_fig9():
    return solve_wave("gap", ModelParams(a=2.0, **FIG9))


@pytest.fixture(scope="session")
def stripe_fig7():
    return solve_wave("stripe", ModelParams(eps=0.003, **FIG7))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import REPORT

    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
