import mpmath as mp
import numpy as np
import pytest

from surfdiff.fields import (GaussianFieldParams, PoissonFieldParams, flat_field, ridge_field,
                             sample_gaussian_field, sample_poisson_field)


def ridge_Z(amplitude=1.0):
    """Adaptive quadrature of the ridge arclength over one period."""
    a = 2 * mp.pi * amplitude
    f = lambda s: mp.sqrt(1 + a**2 * mp.cos(2 * mp.pi * s) ** 2)
    return float(mp.quad(f, [0, 0.25, 0.5, 0.75, 1]))


@pytest.fixture(scope="session")
def Z_ridge():
    return ridge_Z(1.0)


@pytest.fixture
def flat():
    return flat_field(1.0)


@pytest.fixture
def ridge():
    return ridge_field(1.0, 1.0)


@pytest.fixture(scope="session")
def poisson20():
    return sample_poisson_field(PoissonFieldParams(0.5, 20.0, seed=11))


@pytest.fixture(scope="session")
def gauss10():
    return sample_gaussian_field(GaussianFieldParams(0.1, 10.0, seed=5))


def pytest_report_header(config):
    return f"numpy {np.__version__}"


# acceptance criteria report: one line per criterion in the terminal summary
ACCEPTANCE = {}


@pytest.fixture
def record(request):
    def _record(criterion, detail):
        ACCEPTANCE[request.node.nodeid] = (criterion, detail)
    return _record


def pytest_terminal_summary(terminalreporter):
    outcomes = {}
    for kind in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(kind, []):
            if "test_acceptance" in rep.nodeid and rep.when in ("call", "setup"):
                if kind != "passed" or rep.when == "call":
                    outcomes[rep.nodeid] = kind
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, kind in sorted(outcomes.items(), key=lambda kv: kv[0]):
        crit, detail = ACCEPTANCE.get(nodeid, (nodeid.split("::")[-1], "no measurement"))
        terminalreporter.write_line(f"{'PASS' if kind == 'passed' else 'FAIL'}  {crit}: {detail}")
