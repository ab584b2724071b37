import numpy as np
import pytest

from discenv.domains import Ball, Difference, Polytope, Union


@pytest.fixture
def unit_disc():
    return Ball(np.zeros(1), 1.0)


@pytest.fixture
def unit_ball2():
    return Ball(np.zeros(2), 1.0)


@pytest.fixture
def square():
    return Polytope(np.array([[1], [-1], [1j], [-1j]]), np.ones(4))


@pytest.fixture
def two_balls():
    return Union((Ball(np.array([-3.0]), 1.0), Ball(np.array([3.0]), 1.0)))


@pytest.fixture
def annulus():
    return Difference(Ball(np.zeros(1), 2.0), np.zeros(1), 1.0)


def random_rational_disc(rng, n=1, degree=4, root_max=0.9):
    """Disc whose zeroth component has prescribed roots of modulus at most ``root_max``."""
    from discenv.discs import RationalDisc

    k = int(rng.integers(1, degree + 1))
    roots = root_max * np.sqrt(rng.uniform(0.01, 1.0, k)) * np.exp(2j * np.pi * rng.random(k))
    p0 = np.polynomial.polynomial.polyfromroots(roots)
    p0 = p0 / p0[0]
    comps = np.zeros((n + 1, degree + 1), dtype=complex)
    comps[0, : p0.size] = p0
    comps[1:] = rng.normal(size=(n, degree + 1)) + 1j * rng.normal(size=(n, degree + 1))
    return RationalDisc(comps), roots


ACCEPTANCE_LINES = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append((number, line))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
