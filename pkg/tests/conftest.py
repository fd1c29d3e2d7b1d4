from __future__ import annotations

import pytest

from gsqg_vstates import ConfigParams, SolveOptions, continuation, geometric_ladder

REFERENCE_OPTIONS = SolveOptions(n_modes=16, n_quad=128, tol=1e-10)
LADDER_EPS_MAX = 0.2
LADDER_STEPS = 4

_LADDERS: dict[float, object] = {}
_ACCEPTANCE_LINES: list[str] = []


def reference_params(alpha: float) -> ConfigParams:
    """Three-fold aligned configuration with rings at radii 1 and 2."""
    return ConfigParams(alpha=alpha, m=3, vartheta=0, d1=1.0, d2=2.0, gamma0=1.0, gamma1=1.0)


def reference_ladder(alpha: float):
    """Continuation over ``geometric_ladder(0.2, 4)``, computed once per session."""
    if alpha not in _LADDERS:
        params = reference_params(alpha)
        targets = geometric_ladder(LADDER_EPS_MAX, LADDER_STEPS)
        _LADDERS[alpha] = continuation(targets, params, REFERENCE_OPTIONS)
    return _LADDERS[alpha]


def record_acceptance(line: str) -> None:
    print(line)
    _ACCEPTANCE_LINES.append(line)


@pytest.fixture
def acceptance_report():
    return record_acceptance


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
