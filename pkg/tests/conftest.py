import numpy as np
import pytest

# acceptance criteria append (criterion, passed, detail) here
ACCEPTANCE_RESULTS = []


def rand_sym(rng, m, scale=1.0):
    b = rng.standard_normal((m, m)) * scale
    return 0.5 * (b + b.T)


def rand_psd(rng, m, rank=None):
    g = rng.standard_normal((m, rank or m))
    return g @ g.T / m


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
