import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_rational_disc
from discenv.core import CircleGrid
from discenv.discs import RationalDisc, make_polynomial_disc, make_touching_disc
from discenv.functionals import (
    InfinityOnCircleError,
    ball_majorant_functional,
    h_functional,
    j_functional,
    poisson_integral,
    riesz_residual,
)


def test_poisson_integral_of_polynomial_disc(unit_disc):
    # f(zeta) = 2 zeta: the whole circle |w| = 2 lies outside the unit disc
    f = make_polynomial_disc([0.0], [[2.0]])
    val, bad = poisson_integral(lambda p: np.log(np.abs(p[:, 0])), f, CircleGrid(256), unit_disc)
    assert bad == 1.0
    assert val == pytest.approx(np.log(2.0), abs=1e-12)


def test_poisson_integral_counts_only_outside_nodes(unit_disc):
    # circle of radius 1 about 0.5: only nodes with |w| >= 1 contribute
    f = make_polynomial_disc([0.5], [[1.0]])
    grid = CircleGrid(1024)
    val, bad = poisson_integral(lambda p: np.ones(p.shape[0]), f, grid, unit_disc)
    expected = np.mean(np.abs(0.5 + grid.nodes) >= 1.0)
    assert bad == pytest.approx(expected)
    assert val == pytest.approx(expected)


def test_h_functional_for_touching_disc(unit_disc):
    f = make_touching_disc([3.0], [0.0], 0.5)
    out = h_functional(f, unit_disc, lambda p: np.zeros(p.shape[0]))
    assert out.j_part == pytest.approx(np.log(6.0), abs=1e-12)
    assert out.poisson_part == 0.0 and out.bad_boundary_measure == 0.0
    assert out.value == out.j_part


def test_h_functional_infinite_for_zero_p0(unit_disc):
    f = RationalDisc([[0.0, 0.0], [1.0, 1.0]])
    assert h_functional(f, unit_disc, lambda p: np.zeros(p.shape[0])).value == np.inf


def test_pole_on_circle_is_reported(unit_disc):
    f = RationalDisc([[1.0, -1.0], [2.0, 0.0]])
    with pytest.raises(InfinityOnCircleError):
        poisson_integral(lambda p: np.zeros(p.shape[0]), f, CircleGrid(8), unit_disc)


def test_ball_majorant_functional(unit_disc):
    f = make_polynomial_disc([0.0], [[3.0]])
    val = ball_majorant_functional(f, unit_disc, [0.0], 0.5, CircleGrid(128))
    assert val == pytest.approx(np.log(6.0), abs=1e-12)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_riesz_residual_small(seed):
    f, _ = random_rational_disc(np.random.default_rng(seed), n=2, degree=6, root_max=0.9)
    assert riesz_residual(f) < 1e-8


def test_j_for_touching_disc_in_c2():
    f = make_touching_disc([2.0, 1.0j], [0.0, 0.0], 0.25)
    assert j_functional(f) == pytest.approx(np.log(np.sqrt(5.0) / 0.25), abs=1e-12)
