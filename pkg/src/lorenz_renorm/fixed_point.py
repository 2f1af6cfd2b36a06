"""Outer driver: tune ``r`` until the two scalings agree, then rebuild the map.

For each ``r`` the operator is iterated from identity seeds; the gap
``lambda - mu`` at the converged pair is a continuous function of ``r``.
Its first sign change (scanning the bracket from the left) is refined by a
bracketed scalar solve.  At the matching ``r`` the pair defines a Lorenz map
whose branches are the inverses of ``U`` and ``V`` composed with the power
map, and that map is checked to be fixed by the map-level renormalization.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import herglotz
from .errors import BracketError, DomainError, NotRenormalizableError, RenormError, UsageError
from .funcrep import DEFAULT_DEGREE, FuncRep, Interval, invert_monotone
from .renorm_op import EpsteinPair, IterationTrace, decoupled_residuals, iterate, nonlinearity_extremes
from .roots import find_root
from .scalings import ScalingState

DEFAULT_BRACKET = (0.05, 2.0)
DEFAULT_TOL_R = 1e-8
DEFAULT_ITERATE_TOL = 1e-12
SCAN_POINTS = 16
BRANCH_GRID = 200
DEFINITION_GRID = 500
ORBIT_TOL = 1e-12

DECOUPLED_RESIDUAL_TOL = 1e-9
MAP_RESIDUAL_TOL = 1e-6
LAMBDA_CONSISTENCY_TOL = 1e-8
FACTORIZATION_TOL = 1e-10


# --------------------------------------------------------------------------
# gap as a function of r
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GapEvaluation:
    r: float
    rho: float
    lam: float
    mu: float
    pair: EpsteinPair
    scalings: ScalingState
    trace: IterationTrace

    @property
    def gap(self) -> float:
        return self.lam - self.mu


def evaluate_gap(r: float, rho: float, *, iterate_tol: float = DEFAULT_ITERATE_TOL,
                 degree: int = DEFAULT_DEGREE, max_iter: int = 200) -> GapEvaluation:
    pair, sc, trace = iterate(EpsteinPair.identity(r, rho, degree), iterate_tol, max_iter)
    return GapEvaluation(r, rho, sc.lam, sc.mu, pair, sc, trace)


def scaling_gap(r: float, rho: float, iterate_tol: float = DEFAULT_ITERATE_TOL, *,
                degree: int = DEFAULT_DEGREE, max_iter: int = 200) -> float:
    """``lambda - mu`` at the fixed point of the operator for this ``r``."""
    return evaluate_gap(r, rho, iterate_tol=iterate_tol, degree=degree, max_iter=max_iter).gap


# --------------------------------------------------------------------------
# Lorenz maps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LorenzMapModel:
    """Two-branch map on ``[-1, r]``: ``f = l(|x|**rho)`` left of 0, ``g = t(|x|**rho)`` right of 0.

    ``l_exact`` and ``t_exact``, when present, are the pointwise definitions
    the interpolated branches were sampled from.
    """

    rho: float
    r: float
    lam: float
    a: float
    b: float
    l_branch: FuncRep
    t_branch: FuncRep
    l_exact: Optional[Callable[[float], float]] = field(default=None, compare=False, repr=False)
    t_exact: Optional[Callable[[float], float]] = field(default=None, compare=False, repr=False)

    def _arg(self, x, lo, hi, name):
        x = np.asarray(x, dtype=float)
        tol = ORBIT_TOL * max(1.0, abs(lo), abs(hi))
        if np.any((x < lo - tol) | (x > hi + tol)):
            bad = x[(x < lo - tol) | (x > hi + tol)].flat[0] if x.ndim else float(x)
            raise DomainError(f"{name} is defined on [{lo!r}, {hi!r}], got x={bad!r}", x=bad)
        return np.abs(np.clip(x, lo, hi)) ** self.rho

    def f(self, x):
        return self.l_branch(self._arg(x, -1.0, 0.0, "f"))

    def g(self, x):
        return self.t_branch(self._arg(x, 0.0, self.r, "g"))


def _inverse_branch(F: FuncRep, scale: float, shift: float, sign: float) -> Callable[[float], float]:
    """``z -> shift + sign * F^{-1}(z / scale)``, pointwise."""
    def branch(z):
        return shift + sign * invert_monotone(F, float(z) / scale, tol=1e-14)
    return branch


def reconstruct_lorenz(pair: EpsteinPair, sc: ScalingState, degree: Optional[int] = None) -> LorenzMapModel:
    """The Lorenz map whose inverse branches are ``a U(r - .)`` and ``b V(. + 1)``.

    The branches ``l`` and ``t`` are interpolated from pointwise inversions
    of ``U`` and ``V`` at Chebyshev nodes.
    """
    r, rho = pair.r, pair.rho
    degree = 2 * pair.degree if degree is None else degree
    l_exact = _inverse_branch(pair.U, sc.a, r, -1.0)
    t_exact = _inverse_branch(pair.V, sc.b, -1.0, 1.0)
    l_branch = FuncRep.build(lambda z: l_exact(z), Interval(0.0, 1.0), degree)
    t_branch = FuncRep.build(lambda z: t_exact(z), Interval(0.0, r ** rho), degree)
    return LorenzMapModel(rho, r, sc.lam, sc.a, sc.b, l_branch, t_branch, l_exact, t_exact)


def _in_range(values, lo, hi, what, x):
    values = np.asarray(values, dtype=float)
    tol = ORBIT_TOL * max(1.0, abs(lo), abs(hi))
    bad = (values < lo - tol) | (values > hi + tol)
    if np.any(bad):
        k = int(np.flatnonzero(np.ravel(bad))[0])
        raise NotRenormalizableError(
            f"orbit leaves {what}: value {np.ravel(values)[k]!r} at x={np.ravel(x)[k]!r}",
            x=float(np.ravel(x)[k]), value=float(np.ravel(values)[k]),
        )
    return np.clip(values, lo, hi)


def map_scaling(m: LorenzMapModel) -> float:
    """``-f(f(-1))``."""
    first = _in_range(m.f(-1.0), -1.0, 0.0, "the left branch", -1.0)
    return -float(m.f(first))


def renormalized_branches(m: LorenzMapModel, lam: Optional[float] = None):
    """Pointwise ``(f_hat, g_hat)`` with domain checks on every intermediate point."""
    lam = map_scaling(m) if lam is None else lam
    if not 0 < lam < 1:
        raise NotRenormalizableError(f"scaling {lam!r} is not in (0, 1)", lam=lam)

    def f_hat(x):
        x = np.asarray(x, dtype=float)
        w = _in_range(m.f(lam * x), 0.0, m.r, "the right branch domain", x)
        return m.g(w) / lam

    def g_hat(x):
        x = np.asarray(x, dtype=float)
        w1 = _in_range(m.g(lam * x), -1.0, 0.0, "the left branch domain", x)
        w2 = _in_range(m.f(w1), -1.0, 0.0, "the left branch domain", x)
        return m.f(w2) / lam

    return f_hat, g_hat, lam


def renormalize_map(m: LorenzMapModel, degree: Optional[int] = None) -> LorenzMapModel:
    """Map-level renormalization, returned as a model on the same ``[-1, r]``."""
    f_hat, g_hat, lam = renormalized_branches(m)
    # the renormalizability condition is checked on a uniform grid as well as at the nodes
    f_hat(np.linspace(-1.0, 0.0, BRANCH_GRID))
    g_hat(np.linspace(0.0, m.r, BRANCH_GRID))
    degree = m.l_branch.degree if degree is None else degree
    inv = 1.0 / m.rho

    def l_hat(s):
        return f_hat(-np.asarray(s, dtype=float) ** inv)

    def t_hat(s):
        return g_hat(np.asarray(s, dtype=float) ** inv)

    return LorenzMapModel(
        m.rho, m.r, lam, m.a, m.b,
        FuncRep.build(l_hat, m.l_branch.domain, degree),
        FuncRep.build(t_hat, m.t_branch.domain, degree),
        l_exact=l_hat, t_exact=t_hat,
    )


def map_residuals(m: LorenzMapModel, n_grid: int = BRANCH_GRID) -> tuple[float, float, float]:
    """``sup|f_hat - f|``, ``sup|g_hat - g|`` on branch grids, and the map scaling."""
    f_hat, g_hat, lam = renormalized_branches(m)
    xf = np.linspace(-1.0, 0.0, n_grid)
    xg = np.linspace(0.0, m.r, n_grid)
    return (float(np.max(np.abs(f_hat(xf) - m.f(xf)))),
            float(np.max(np.abs(g_hat(xg) - m.g(xg)))), lam)


@dataclass(frozen=True)
class LorenzCheck:
    f_increasing: bool
    g_increasing: bool
    f_range_ok: bool
    g_range_ok: bool
    factorization_error: float

    @property
    def passed(self) -> bool:
        return (self.f_increasing and self.g_increasing and self.f_range_ok and self.g_range_ok
                and self.factorization_error <= FACTORIZATION_TOL)


def check_lorenz_definition(m: LorenzMapModel, n_grid: int = DEFINITION_GRID) -> LorenzCheck:
    """Monotone branches, ranges inside ``[-1, r]`` and agreement with the branch definitions."""
    xf = np.linspace(-1.0, 0.0, n_grid)
    xg = np.linspace(0.0, m.r, n_grid)
    fv, gv = m.f(xf), m.g(xg)
    slack = 1e-8
    err = 0.0
    if m.l_exact is not None:
        zf = np.abs(xf) ** m.rho
        err = max(err, max(abs(fv[i] - float(m.l_exact(z))) for i, z in enumerate(zf)))
    if m.t_exact is not None:
        zg = np.abs(xg) ** m.rho
        err = max(err, max(abs(gv[i] - float(m.t_exact(z))) for i, z in enumerate(zg)))
    return LorenzCheck(
        f_increasing=bool(np.all(np.diff(fv) > 0)),
        g_increasing=bool(np.all(np.diff(gv) > 0)),
        f_range_ok=bool(fv.min() >= -1 - slack and fv.max() < m.r + slack),
        g_range_ok=bool(gv.min() > -1 - slack and gv.max() <= m.r + slack),
        factorization_error=float(err),
    )


# --------------------------------------------------------------------------
# invariant suite
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    ok: bool
    gating: bool = True

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "threshold": self.threshold,
                "ok": self.ok, "gating": self.gating}


def invariant_checks(pair: EpsteinPair, sc: ScalingState, model: LorenzMapModel,
                     *, delta: float = herglotz.DEFAULT_DELTA,
                     epsilon: float = herglotz.DEFAULT_EPSILON) -> list[Check]:
    """Residuals, brackets, Herglotz and class conditions at a converged pair.

    Residual and definition checks are gating; the nonlinearity-class
    checks are reported but do not gate (see README, known limitations).
    """
    r, rho = pair.r, pair.rho
    checks = []
    res_u, res_v = decoupled_residuals(pair, sc)
    checks.append(Check("decoupled_U", res_u, DECOUPLED_RESIDUAL_TOL, res_u <= DECOUPLED_RESIDUAL_TOL))
    checks.append(Check("decoupled_V", res_v, DECOUPLED_RESIDUAL_TOL, res_v <= DECOUPLED_RESIDUAL_TOL))
    try:
        mf, mg, lam_map = map_residuals(model)
    except RenormError:
        mf = mg = lam_map = math.inf
    checks.append(Check("map_f", mf, MAP_RESIDUAL_TOL, mf <= MAP_RESIDUAL_TOL))
    checks.append(Check("map_g", mg, MAP_RESIDUAL_TOL, mg <= MAP_RESIDUAL_TOL))
    dl = abs(lam_map - sc.lam)
    checks.append(Check("lambda_consistency", dl, LAMBDA_CONSISTENCY_TOL, dl <= LAMBDA_CONSISTENCY_TOL))
    checks.append(Check("scaling_brackets", 0.0 if sc.brackets_hold() else 1.0, 0.0, sc.brackets_hold()))

    definition = check_lorenz_definition(model)
    checks.append(Check("lorenz_definition", definition.factorization_error, FACTORIZATION_TOL,
                        definition.passed))

    for name, F in (("U", pair.U), ("V", pair.V)):
        rep = herglotz.check_omega(F, F.domain, 0.0)
        ok = rep.is_increasing and rep.min_schwarzian >= -herglotz.SIGN_SLACK
        checks.append(Check(f"herglotz_{name}", rep.min_schwarzian, -herglotz.SIGN_SLACK, ok))

    bounds = herglotz.bounds_sigma_gamma(r, rho, delta, epsilon)
    nz, nw = nonlinearity_extremes(pair)
    checks.append(Check("class_Z", nz, bounds.sigma, nz <= bounds.sigma + herglotz.SIGN_SLACK, gating=False))
    checks.append(Check("class_W", nw, bounds.gamma, nw <= bounds.gamma + herglotz.SIGN_SLACK, gating=False))
    return checks


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanPoint:
    r: float
    gap: Optional[float]
    error: Optional[str] = None


@dataclass(frozen=True)
class SolveResult:
    rho: float
    r_star: float
    lambda_star: float
    mu_star: float
    pair_star: EpsteinPair
    scalings: ScalingState
    map: LorenzMapModel
    residuals: dict
    checks: list
    trace_summary: dict
    scan: list
    wall_time: float
    trace: Optional[IterationTrace] = None

    @property
    def gap(self) -> float:
        return self.lambda_star - self.mu_star

    @property
    def gating_passed(self) -> bool:
        return all(c.ok for c in self.checks if c.gating)


def _as_interval(bracket) -> Interval:
    return bracket if isinstance(bracket, Interval) else Interval(*bracket)


def scan_gap(rho: float, bracket, n_scan: int = SCAN_POINTS, *, evaluate=None,
             stop_at_crossing: bool = True) -> tuple[list[ScanPoint], Optional[tuple[float, float]]]:
    """Sample the gap left to right; return the samples and the first sign-change pair."""
    bracket = _as_interval(bracket)
    evaluate = evaluate or (lambda r: evaluate_gap(r, rho))
    points, prev, crossing = [], None, None
    for r in bracket.grid(n_scan):
        r = float(r)
        try:
            gap = evaluate(r).gap
        except RenormError as exc:
            points.append(ScanPoint(r, None, f"{type(exc).__name__}: {exc}"))
            prev = None
            continue
        points.append(ScanPoint(r, gap))
        if gap == 0.0:
            crossing = (r, r)
        elif prev is not None and (prev.gap < 0) != (gap < 0):
            crossing = (prev.r, r)
        prev = points[-1]
        if crossing and stop_at_crossing:
            break
    return points, crossing


def find_critical_r(rho: float, bracket=DEFAULT_BRACKET, tol_r: float = DEFAULT_TOL_R, *,
                    degree: int = DEFAULT_DEGREE, iterate_tol: float = DEFAULT_ITERATE_TOL,
                    max_iter: int = 200, n_scan: int = SCAN_POINTS,
                    map_degree: Optional[int] = None) -> SolveResult:
    """Locate the first ``r`` in ``bracket`` where the two scalings coincide.

    Raises :class:`BracketError` (listing the sampled gaps) if the scan sees
    no sign change.
    """
    if tol_r <= 0:
        raise UsageError("tol_r must be positive")
    start = time.perf_counter()
    cache: dict[float, GapEvaluation] = {}

    def evaluate(r: float) -> GapEvaluation:
        if r not in cache:
            cache[r] = evaluate_gap(r, rho, iterate_tol=iterate_tol, degree=degree, max_iter=max_iter)
        return cache[r]

    points, crossing = scan_gap(rho, bracket, n_scan, evaluate=evaluate)
    if crossing is None:
        raise BracketError(
            f"no sign change of lambda - mu on {tuple(_as_interval(bracket))} for rho={rho}",
            rho=rho, samples=[(p.r, p.gap, p.error) for p in points],
        )
    lo, hi = crossing
    if lo != hi:
        scale = max(evaluate(lo).lam, evaluate(hi).lam)
        find_root(lambda r: evaluate(r).gap, lo, hi, xtol=tol_r, ftol=0.1 * tol_r * scale)
        inside = [ev for r, ev in cache.items() if lo <= r <= hi]
        best = min(inside, key=lambda ev: abs(ev.gap))
    else:
        best = evaluate(lo)

    model = reconstruct_lorenz(best.pair, best.scalings, map_degree)
    checks = invariant_checks(best.pair, best.scalings, model)
    residuals = {c.name: c.value for c in checks
                 if c.name in ("decoupled_U", "decoupled_V", "map_f", "map_g", "lambda_consistency")}
    return SolveResult(
        rho=rho, r_star=best.r, lambda_star=best.lam, mu_star=best.mu,
        pair_star=best.pair, scalings=best.scalings, map=model, residuals=residuals,
        checks=checks, trace_summary=best.trace.summary(), scan=points,
        wall_time=time.perf_counter() - start, trace=best.trace,
    )
