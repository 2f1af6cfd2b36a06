import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lorenz_renorm.errors import BracketError, InconsistentInputError, UsageError
from lorenz_renorm.funcrep import build, identity
from lorenz_renorm.scalings import (
    domain_U,
    domain_V,
    lambda_minus,
    lambda_plus,
    lambda_residual,
    mu_minus,
    mu_plus,
    mu_residual,
    normalizations,
    solve_lambda,
    solve_mu,
    solve_scalings,
    solve_y,
    y_floor,
)


def bisect(f, lo, hi, n=200):
    """Plain bisection, used as an oracle independent of the package solver."""
    flo = f(lo)
    for _ in range(n):
        mid = 0.5 * (lo + hi)
        if (f(mid) > 0) == (flo > 0):
            lo, flo = mid, f(mid)
        else:
            hi = mid
    return 0.5 * (lo + hi)


def id_pair(r, rho, degree=32):
    return identity(domain_U(r, rho), degree), identity(domain_V(r, rho), degree)


def test_bracket_formulas():
    assert lambda_plus(1, 2) == pytest.approx(0.70711, abs=1e-5)
    assert lambda_plus(0.453, 2) == pytest.approx(0.5583, abs=1e-4)
    assert mu_plus(1, 2) == pytest.approx(0.5)
    assert mu_plus(0.453, 2) == pytest.approx(1 / 1.453, abs=1e-5)
    assert mu_plus(1e-9, 2) == pytest.approx(1.0)
    assert lambda_plus(1, 50) > lambda_plus(1, 5) > lambda_plus(1, 2)
    assert lambda_minus(1, 2) == pytest.approx(0.5 * 0.5 / (1.70711 * 1.35355), abs=1e-5)
    assert 0 < mu_minus(1, 2) < mu_plus(1, 2)
    assert lambda_minus(1e-6, 2) < 1e-6


def test_parameter_validation():
    with pytest.raises(UsageError):
        lambda_plus(0.0, 2)
    with pytest.raises(UsageError):
        mu_plus(1.0, 1.0)


@pytest.mark.parametrize("rho", [1.5, 2.0, 3.0])
def test_lower_brackets_below_upper(rho):
    rs = np.linspace(0.1, 2.0, 40)
    lm = np.array([lambda_minus(r, rho) for r in rs])
    mm = np.array([mu_minus(r, rho) for r in rs])
    assert np.all(lm < [lambda_plus(r, rho) for r in rs])
    assert np.all(mm < [mu_plus(r, rho) for r in rs])
    assert np.all(np.isfinite(mm)) and np.max(np.abs(np.diff(mm))) < 0.1


def test_solve_lambda_identity_quadratic():
    for r in (0.5, 1.0):
        _, V = id_pair(r, 2.0)
        lam = solve_lambda(V, r, 2.0)
        assert lam == pytest.approx((-1 + math.sqrt(1 + 2 * r * r)) / (2 * r), abs=1e-10)
        assert lambda_minus(r, 2.0) < lam < lambda_plus(r, 2.0)
        assert abs(lambda_residual(V, r, 2.0, lam)) <= 1e-13
    assert solve_lambda(id_pair(0.5, 2.0)[1], 0.5, 2.0) == pytest.approx(0.22474, abs=1e-5)
    assert solve_lambda(id_pair(1.0, 2.0)[1], 1.0, 2.0) == pytest.approx(0.36603, abs=1e-5)


def test_solve_y_identity_cubic():
    U, _ = id_pair(0.5, 2.0)
    y = solve_y(U, 0.5, 0.3, 2.0)
    oracle = bisect(lambda t: t ** 3 + 0.5 * t ** 2 - 0.8, 0.3, 1.0)
    assert y == pytest.approx(oracle, abs=1e-10)
    assert abs(y ** 2 * U(0.5 + y) - U(0.8)) <= 1e-13 * U(1.5)
    assert y > y_floor(0.5, 0.3) == pytest.approx(0.6787, abs=1e-4)


def test_solve_y_near_one():
    U, _ = id_pair(0.5, 2.0)
    assert solve_y(U, 0.5, 0.999999, 2.0) > 0.99999


def test_solve_y_inconsistent_input():
    # a decreasing U breaks the sign pattern
    dom = domain_U(0.5, 2.0)
    U = build(lambda x: 3.0 - x, dom, 16)
    with pytest.raises(InconsistentInputError):
        solve_y(U, 0.5, 0.3, 2.0)


def test_solve_mu_identity_nested_oracle():
    r = 0.5
    U, _ = id_pair(r, 2.0)
    mu, y = solve_mu(U, r, 2.0)

    def y_of(m):
        return bisect(lambda t: t * t * (r + t) - (r + m), m, 1.0)

    def g(m):
        return m - 1.0 / (4 * (r + y_of(m)) ** 1.5 * (r + m) ** 0.5)

    oracle = bisect(g, mu_minus(r, 2.0), mu_plus(r, 2.0))
    assert mu == pytest.approx(oracle, abs=1e-8)
    assert mu == pytest.approx(0.211, abs=1e-3)
    assert y == pytest.approx(0.753, abs=1e-3)
    assert mu_minus(r, 2.0) < mu < mu_plus(r, 2.0)
    assert mu < y < 1
    assert abs(mu_residual(U, r, 2.0, mu)[0]) <= 1e-12


def test_bracket_error_when_class_fails():
    # a strongly convex V has W' growing, so lambda falls outside its bracket
    r = 0.5
    V = build(lambda x: np.expm1(6 * x), domain_V(r, 2.0), 64)
    with pytest.raises(BracketError):
        solve_lambda(V, r, 2.0)


def test_normalizations_identity():
    U, V = id_pair(0.5, 2.0)
    a, b = normalizations(U, V, 0.5, 0.22474, 0.7883, 2.0)
    assert b == pytest.approx(0.25 / 1.11237, abs=1e-5)
    assert a == pytest.approx(1 / 1.2883, abs=1e-5)
    assert a * U(0.5 + 0.7883) == pytest.approx(1.0, abs=1e-15)
    assert b * V(0.22474 * 0.5 + 1) == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("rho", [1.5, 2.0, 3.0, 5.0])
def test_identity_scalings_respect_brackets(rho):
    for r in (0.15, 0.453, 1.2):
        sc = solve_scalings(*id_pair(r, rho), r, rho)
        assert sc.brackets_hold()
        assert sc.y > sc.y_floor


@pytest.mark.parametrize("rho", [2.0, 3.0])
def test_residuals_change_sign_once(rho):
    r = 0.453
    U, V = id_pair(r, rho)
    lam = np.linspace(lambda_minus(r, rho), lambda_plus(r, rho), 64)
    f = np.array([lambda_residual(V, r, rho, x) for x in lam])
    assert np.count_nonzero(np.diff(np.sign(f))) == 1
    mu = np.linspace(mu_minus(r, rho), mu_plus(r, rho), 64)
    g = np.array([mu_residual(U, r, rho, x)[0] for x in mu])
    assert np.count_nonzero(np.diff(np.sign(g))) == 1


@given(st.floats(0.1, 1.9), st.floats(1e-4, 1e-2))
@settings(max_examples=15, deadline=None)
def test_scalings_continuous_in_r(r, h):
    lam0 = solve_lambda(identity(domain_V(r, 2.0), 24), r, 2.0)
    lam1 = solve_lambda(identity(domain_V(r + h, 2.0), 24), r + h, 2.0)
    mu0 = solve_mu(identity(domain_U(r, 2.0), 24), r, 2.0)[0]
    mu1 = solve_mu(identity(domain_U(r + h, 2.0), 24), r + h, 2.0)[0]
    assert abs(lam1 - lam0) <= 2.0 * h
    assert abs(mu1 - mu0) <= 2.0 * h
