import math

import numpy as np
import pytest

from lorenz_renorm import scalings
from lorenz_renorm.errors import BracketError, DomainError, NonConvergenceError
from lorenz_renorm.fixed_point import (
    LorenzMapModel,
    check_lorenz_definition,
    evaluate_gap,
    find_critical_r,
    map_residuals,
    map_scaling,
    reconstruct_lorenz,
    renormalize_map,
    scaling_gap,
)
from lorenz_renorm.funcrep import FuncRep, Interval
from lorenz_renorm.renorm_op import EpsteinPair


@pytest.fixture(scope="module")
def rho2_model(rho2_solution):
    return rho2_solution.map


# --- gap sign pattern ------------------------------------------------------

def test_gap_negative_at_small_r():
    assert scaling_gap(0.2, 2.0) < 0


def test_gap_positive_at_large_r():
    assert scaling_gap(1.2, 2.0) > 0


def test_gap_nearly_vanishes_at_anchor(rho2_anchor):
    assert abs(rho2_anchor.gap) < 1e-3 * rho2_anchor.lam


def test_stalled_iteration_gives_up_early():
    # at r = 0.05 the iterates stop improving long before the cap
    with pytest.raises(NonConvergenceError) as info:
        evaluate_gap(0.05, 2.0)
    assert "stalled" in str(info.value)
    assert len(info.value.details["trace"].records) < 200


# --- driver ----------------------------------------------------------------

def test_critical_r_on_narrow_bracket():
    res = find_critical_r(2.0, (0.1, 1.2), 1e-6)
    assert res.r_star == pytest.approx(0.453, abs=1e-3)
    assert abs(res.gap) <= 1e-6 * max(res.lambda_star, res.mu_star)


def test_bracket_without_crossing_lists_samples():
    with pytest.raises(BracketError) as info:
        find_critical_r(2.0, (1.0, 1.2), 1e-6, n_scan=4)
    samples = info.value.details["samples"]
    assert len(samples) == 4
    assert all(gap is not None and gap > 0 for _, gap, _ in samples)


def test_default_solution(rho2_solution):
    res = rho2_solution
    assert res.r_star == pytest.approx(0.453, abs=1e-3)
    assert res.gating_passed
    sc = res.scalings
    assert sc.lambda_lo < res.lambda_star < sc.lambda_hi
    assert abs(res.lambda_star - res.mu_star) <= 1e-8 * res.lambda_star


def test_map_and_decoupled_residuals_same_order(rho2_solution):
    res = rho2_solution.residuals
    assert max(res["decoupled_U"], res["decoupled_V"]) <= 1e3 * 1e-12
    assert max(res["map_f"], res["map_g"]) <= 1e-6


# --- reconstruction ----------------------------------------------------------

def test_branch_endpoints(rho2_model):
    m = rho2_model
    assert float(m.f(0.0)) == pytest.approx(m.r, abs=1e-12)
    assert float(m.g(0.0)) == pytest.approx(-1.0, abs=1e-12)
    assert float(m.g(m.r)) == pytest.approx(float(m.t_branch(m.r ** m.rho)), abs=1e-15)


def test_map_scaling_matches_lambda(rho2_solution):
    lam = map_scaling(rho2_solution.map)
    assert 0 < lam < 1
    assert lam == pytest.approx(rho2_solution.lambda_star, abs=1e-8)


def test_renormalized_map_is_fixed(rho2_model):
    res_f, res_g, lam = map_residuals(rho2_model)
    assert res_f <= 1e-6 and res_g <= 1e-6


def test_renormalized_endpoint(rho2_model):
    m = rho2_model
    lam = map_scaling(m)
    left = float(m.g(float(m.f(-lam)))) / lam
    assert left == pytest.approx(float(m.f(-1.0)), abs=1e-6)
    hat = renormalize_map(m)
    assert float(hat.f(-1.0)) == pytest.approx(left, abs=1e-9)


def test_model_rejects_points_off_branch(rho2_model):
    with pytest.raises(DomainError):
        rho2_model.f(0.5)
    with pytest.raises(DomainError):
        rho2_model.g(rho2_model.r + 0.1)


# --- Lorenz definition -------------------------------------------------------

def test_definition_holds_at_fixed_point(rho2_model):
    report = check_lorenz_definition(rho2_model)
    assert report.passed
    assert report.factorization_error <= 1e-10


def _toy_model(l_branch):
    r, rho = 0.5, 2.0
    t = FuncRep.build(lambda s: -1.0 + 1.5 * s / r ** rho, Interval(0.0, r ** rho), 16)
    return LorenzMapModel(rho, r, 0.3, 1.0, 1.0, l_branch, t)


def test_definition_accepts_toy_map():
    # f(x) = r (1 - x**2) rescaled into [-1, r]; increasing because l decreases
    l = FuncRep.build(lambda s: 0.5 - 1.5 * s, Interval(0.0, 1.0), 16)
    assert check_lorenz_definition(_toy_model(l)).passed


def test_definition_flags_wrong_monotonicity():
    # l increasing makes f = l(|x|**rho) decrease on [-1, 0]
    l = FuncRep.build(lambda s: -1.0 + 1.5 * s, Interval(0.0, 1.0), 16)
    report = check_lorenz_definition(_toy_model(l))
    assert not report.f_increasing
    assert report.g_increasing
    assert not report.passed


def test_definition_flags_range_escape():
    l = FuncRep.build(lambda s: 0.9 - 1.5 * s, Interval(0.0, 1.0), 16)
    report = check_lorenz_definition(_toy_model(l))
    assert not report.f_range_ok


def test_reconstruction_from_identity_pair_inverts_branches():
    r, rho = 0.5, 2.0
    pair = EpsteinPair.identity(r, rho, 32)
    sc = scalings.solve_scalings(pair.U, pair.V, r, rho)
    m = reconstruct_lorenz(pair, sc)
    # with U = V = id: l(z) = r - z / a and t(z) = z / b - 1
    z = np.linspace(0.0, 1.0, 7)
    assert np.allclose(m.l_branch(z), r - z / sc.a, atol=1e-13)
    s = np.linspace(0.0, r ** rho, 7)
    assert np.allclose(m.t_branch(s), s / sc.b - 1.0, atol=1e-13)
    assert math.isclose(float(m.g(r)), r ** rho / sc.b - 1.0, abs_tol=1e-13)
