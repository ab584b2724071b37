import numpy as np
import pytest

from discenv.domains import Ball, Polytope
from discenv.functionals import h_functional, j_functional
from discenv.envelopes import (
    ConnectivityError,
    EBJField,
    OptimizerConfig,
    PoleParam,
    PolyParam,
    almost_extremal_disc,
    ball_majorant_envelope,
    boundary_envelope,
    ebj_ball_inf,
    ebj_estimate,
    ebj_witness,
    estimate_many,
    lempert_envelope,
    theorem1_envelope,
    theorem2_envelope,
    validate_disc_class,
)
from discenv.core import CircleGrid

LIGHT = OptimizerConfig(restarts=2, budget=300, quad_n=256, degree=4)


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(restarts=0)
    with pytest.raises(ValueError):
        OptimizerConfig(quad_n=4)
    with pytest.raises(ValueError):
        OptimizerConfig(penalty=0.0)


def test_ebj_closed_form_ball(unit_ball2):
    z = np.array([2.0, 1.0j])
    assert ebj_ball_inf(unit_ball2, z) == pytest.approx(np.log(np.sqrt(5.0)), abs=1e-12)
    assert ebj_ball_inf(unit_ball2, [0.2, 0.1]) == 0.0


def test_ebj_union_is_minimum_over_parts(two_balls):
    assert ebj_ball_inf(two_balls, [1.0]) == pytest.approx(np.log(2.0))
    assert ebj_ball_inf(two_balls, [0.0]) == pytest.approx(np.log(3.0))


def test_ebj_annulus_numeric(annulus):
    # the best inscribed ball touches both circles: centre 1.5 u, radius 0.5
    assert ebj_ball_inf(annulus, [0.0]) == pytest.approx(np.log(3.0), abs=1e-6)
    val, w, d = ebj_witness(annulus, [3.0])
    assert d > 0 and annulus.contains(w)
    assert val == pytest.approx(np.log(np.abs(3.0 - w[0]) / d), abs=1e-12)


def test_ebj_field_modes_agree(square):
    f_c = EBJField(square, LIGHT, mode="candidates")
    f_e = EBJField(square, LIGHT, mode="exact")
    pts = np.array([[2.0], [1.5j], [-3.0 + 1j]])
    exact = f_e(pts)
    cand = f_c(pts)
    assert np.all(cand >= exact - 1e-9)
    assert np.all(cand <= exact + 0.05)
    with pytest.raises(ValueError):
        EBJField(square, LIGHT, mode="closed")


def test_ebj_estimate_touching_witness(unit_disc):
    est = ebj_estimate(unit_disc, [2.0])
    assert est.value == pytest.approx(np.log(2.0))
    assert est.feasible and est.certified_upper_bound


def test_pole_param_touching_seed_round_trip():
    z = np.array([2.0])
    grid = CircleGrid(64)
    p = PoleParam(z, 1, 0, grid.nodes)
    x = p.pack(np.array([np.log(2.0)]), np.array([np.pi]), np.array([[1.5 * (-2.0)]]))
    f = p.build(x)
    j, viol, vals = p.evaluate(x)
    assert j == pytest.approx(-np.log(2.0))
    assert np.array_equal(f.center_affine(), z)
    assert vals.shape == (64, 1)


def test_poly_param_centre():
    z = np.array([1.0, 2.0j])
    p = PolyParam(z, 3, CircleGrid(32).nodes)
    x = p.random_start(np.random.default_rng(0), 0.3)
    assert np.array_equal(p.build(x).center_affine(), z)


def test_lempert_on_ball_matches_log_norm(unit_ball2):
    z = np.array([1.2 + 1j, -0.5])
    est = lempert_envelope(unit_ball2, z, opt=LIGHT)
    target = np.log(np.linalg.norm(z))
    assert target - 1e-9 <= est.value <= target + 0.02
    assert est.feasible and est.certified_upper_bound
    assert np.array_equal(est.best_disc.center_affine(), z)


def test_lempert_refuses_disconnected(two_balls):
    with pytest.raises(ConnectivityError):
        lempert_envelope(two_balls, [0.0], opt=LIGHT)
    est = boundary_envelope(two_balls, [0.0], opt=LIGHT, allow_disconnected=True)
    assert est.value == pytest.approx(np.log(3.0), abs=0.02)


def test_inside_point_gives_zero(unit_disc):
    for fn in (lempert_envelope, theorem1_envelope, theorem2_envelope):
        est = fn(unit_disc, [0.3], opt=LIGHT)
        assert est.value == 0.0 and est.feasible


def test_theorem2_unit_disc(unit_disc):
    est = theorem2_envelope(unit_disc, [2.0], opt=LIGHT)
    assert np.log(2.0) - 1e-9 <= est.value <= np.log(2.0) + 0.02


def test_theorem1_polytope_bounded_by_ebj(square):
    opt = OptimizerConfig(restarts=2, budget=400, quad_n=256, degree=4)
    est = theorem1_envelope(square, [2.0 + 0.5j], opt=opt)
    assert est.feasible
    assert est.value <= ebj_ball_inf(square, [2.0 + 0.5j]) + 1e-9


def test_ball_majorant_envelope(unit_disc):
    est = ball_majorant_envelope(unit_disc, [2.0], [0.0], 0.5, opt=LIGHT)
    assert est.value <= np.log(4.0) + 1e-9
    with pytest.raises(ValueError):
        ball_majorant_envelope(unit_disc, [2.0], [0.8], 0.5, opt=LIGHT)


def test_estimates_are_deterministic(unit_ball2):
    z = np.array([2.0, 0.5j])
    a = theorem1_envelope(unit_ball2, z, opt=LIGHT, point_index=3)
    b = theorem1_envelope(unit_ball2, z, opt=LIGHT, point_index=3)
    assert a.value == b.value
    assert np.array_equal(a.best_disc.components, b.best_disc.components)


def test_estimate_many_preserves_order(unit_disc):
    pts = [np.array([2.0]), np.array([3.0j]), np.array([0.1])]
    serial = estimate_many(lempert_envelope, unit_disc, pts, opt=LIGHT)
    threaded = estimate_many(lempert_envelope, unit_disc, pts, opt=LIGHT, threads=3)
    assert [e.value for e in serial] == [e.value for e in threaded]
    assert serial[2].value == 0.0


def test_almost_extremal_disc_rejects_bad_inputs(unit_disc):
    with pytest.raises(ValueError):
        almost_extremal_disc(unit_disc, Ball(np.zeros(1), 0.2), [2.0], 0.0)
    with pytest.raises(ValueError):
        almost_extremal_disc(unit_disc, Ball(np.zeros(1), 1.5), [2.0], 0.1)


def test_almost_extremal_disc_inside_rest_is_constant(unit_disc):
    disc, h, bad = almost_extremal_disc(unit_disc, Ball(np.zeros(1), 0.2), [0.5], 0.1)
    assert h == 0.0 and bad == 0.0 and disc.degree == 0


@pytest.mark.parametrize("cls", ["touching_balls", "one_pole", "boundary_in_X", "all_projective"])
def test_validate_good_classes(unit_disc, cls):
    rep = validate_disc_class(cls, unit_disc, [[0.2], [2.0], [1.5j]], LIGHT)
    assert rep.passed
    assert rep.property4


def test_validate_unknown_class(unit_disc):
    with pytest.raises(ValueError):
        validate_disc_class("nonsense", unit_disc, [[0.0]])


def octagon():
    ang = 2 * np.pi * np.arange(8) / 8
    return Polytope(np.exp(1j * ang)[:, None], np.ones(8))


def test_lempert_and_poisson_envelopes_agree_on_polytope():
    X = octagon()
    opt = OptimizerConfig(restarts=4, budget=1000)
    for i, z in enumerate(([1.5], [2j], [-1.2 + 1.2j], [3.0], [0.5 - 1.6j])):
        a = lempert_envelope(X, z, opt=opt, point_index=i)
        b = theorem2_envelope(X, z, opt=opt, point_index=i)
        assert abs(a.value - b.value) <= 0.05
        # touching discs are members of the one-pole class
        assert a.value <= ebj_ball_inf(X, z) + 1e-9


def test_poisson_envelope_on_union_beats_min_oracle(two_balls):
    # discs crossing both components average the majorant over both balls
    for i, z in enumerate(([0.0], [1.0], [0.3 + 0.8j])):
        est = theorem2_envelope(two_balls, z, point_index=i)
        oracle = min(np.log(abs(z[0] + 3)), np.log(abs(z[0] - 3)))
        assert est.feasible
        assert est.value < oracle - 0.1
    assert theorem2_envelope(two_balls, [0.0]).value <= np.log(3.0) + 0.02


def test_feasible_estimate_value_matches_functional(unit_ball2):
    z = np.array([1.0, 1.5j])
    field = EBJField(unit_ball2)
    est = theorem1_envelope(unit_ball2, z, opt=LIGHT, field=field)
    assert est.feasible
    grid = CircleGrid(4 * LIGHT.quad_n)
    hv = h_functional(est.best_disc, unit_ball2, field, grid)
    assert abs(hv.value - est.value) <= 1e-9
    assert np.all(unit_ball2.contains_many(est.best_disc.affine(grid.nodes))) or hv.poisson_part >= 0.0


def test_lempert_best_disc_boundary_in_x(square):
    est = lempert_envelope(square, [2.0 + 1j], opt=LIGHT)
    assert est.feasible
    grid = CircleGrid(4 * LIGHT.quad_n)
    assert np.all(square.contains_many(est.best_disc.affine(grid.nodes)))
    assert abs(j_functional(est.best_disc) - est.value) <= 1e-9


def test_almost_extremal_vacuous_eps_stops_at_first_radius(unit_disc):
    res = almost_extremal_disc(unit_disc, Ball(np.zeros(1), 0.2), [2.0], 1.0)
    assert res.converged and len(res.history) == 1


def test_affine_class_fails_far_from_tiny_ball():
    rep = validate_disc_class("affine", Ball(np.zeros(1), 0.01), [[0.0], [5.0]], OptimizerConfig(budget=300))
    assert not rep.passed
    far = [e for e in rep.entries if abs(e["centre"][0] - 5.0) < 1e-12]
    assert not all(e["passed"] for e in far)
