import numpy as np
import pytest

from spacedec import manifold as mh

KINDS = ["euclidean", "oblique", "fsphere", "stiefel:3x2"]

# Acceptance outcomes collected by tests/test_acceptance.py, printed after the run.
ACCEPTANCE_LINES = []


def point_for(kind, seed=0, m=6, n=7, r=3, omega=0.7):
    return mh.random_point(kind, m, n, r, omega, seed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=KINDS)
def kind(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
