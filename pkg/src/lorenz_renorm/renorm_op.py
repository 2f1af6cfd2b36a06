"""The decoupled renormalization operator on pairs of inverse branches.

One step maps ``(U, V)`` to ``(U∘Psi / lambda**rho, V∘Phi / mu**rho)`` and
re-interpolates the result on the fixed node sets of ``J_U`` and ``J_V``.
``Z``, ``W``, ``Psi`` and ``Phi`` are kept as exact pointwise composites
(with jets), not as interpolants: ``Z`` and ``W`` carry a root singularity
at their left end, which a polynomial would smear over the whole domain.
"""

from __future__ import annotations

import math
from dataclasses import InitVar, dataclass, field
from typing import Optional

import numpy as np

from . import herglotz, scalings
from .errors import BranchError, InvariantError, NonConvergenceError, UsageError
from .funcrep import (
    DEFAULT_DEGREE,
    FuncRep,
    Interval,
    SmoothFunction,
    affine_jet,
    compose,
    compose_jet,
    identity,
    is_monotone,
    power_jet,
    sup_diff,
)
from .scalings import ScalingState

BRANCH_CLAMP = 1e-12
ZERO_TOL = 1e-10
CONVERGENCE_GRID = 256
CLASS_GRID = 200
STALL_WINDOW = 30
STALL_FACTOR = 1e3


class RootNormalized(SmoothFunction):
    """``x -> (base(shift + x) / norm) ** (1/rho)`` on ``domain``.

    Base values in ``[-1e-12, 0)`` are treated as zero; anything more
    negative leaves the real branch of the root.  The base is assumed to
    vanish at 0, so the left end point maps to exactly 0 rather than to the
    root of the interpolant's rounding error there.
    """

    def __init__(self, base: SmoothFunction, shift: float, norm: float, rho: float, domain: Interval):
        if norm <= 0:
            raise BranchError(f"normalizing value must be positive, got {norm!r}", norm=norm)
        self.base, self.shift, self.norm, self.rho = base, shift, norm, rho
        self.domain = domain

    def jet(self, x, order=2):
        x = np.asarray(x, dtype=float)
        u = self.base.jet(self.shift + x, order) / self.norm
        if np.any(u[0] < -BRANCH_CLAMP):
            bad = x[u[0] < -BRANCH_CLAMP].flat[0] if x.ndim else float(x)
            raise BranchError(f"negative argument to the root at x={bad!r}", x=bad)
        u[0] = np.where(self.shift + x == 0.0, 0.0, np.maximum(u[0], 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            return power_jet(u, 1.0 / self.rho)


class _Psi(SmoothFunction):
    """``z -> r - r * W(lam * (r - z))``."""

    def __init__(self, W: SmoothFunction, lam: float, r: float, domain: Interval):
        self.W, self.lam, self.r, self.domain = W, lam, r, domain

    def jet(self, x, order=2):
        s = self.lam * (self.r - np.asarray(x, dtype=float))
        w = self.W.jet(s, order)
        chain = (-self.lam) ** np.arange(order + 1)
        return affine_jet(w * chain.reshape((-1,) + (1,) * np.ndim(s)), -self.r, self.r)


class _Phi(SmoothFunction):
    """``z -> 1 - Z(Z(mu * (1 - z)))``."""

    def __init__(self, Z: SmoothFunction, mu: float, domain: Interval):
        self.Z, self.mu, self.domain = Z, mu, domain

    def jet(self, x, order=2):
        x = np.asarray(x, dtype=float)
        s = self.mu * (1.0 - x)
        inner = self.Z.jet(s, order) * ((-self.mu) ** np.arange(order + 1)).reshape((-1,) + (1,) * x.ndim)
        outer = self.Z.jet(inner[0], order)
        return affine_jet(compose_jet(outer, inner), -1.0, 1.0)


def make_Z(U: SmoothFunction, r: float, y: float, rho: float) -> RootNormalized:
    """Root-normalized translate of ``U`` with ``Z(-r) = 0`` and ``Z(y) = 1``."""
    return RootNormalized(U, r, float(U(r + y)), rho, scalings.domain_Z(r, rho))


def make_W(V: SmoothFunction, r: float, lam: float, rho: float) -> RootNormalized:
    """Root-normalized translate of ``V`` with ``W(-1) = 0`` and ``W(lam*r) = 1``."""
    return RootNormalized(V, 1.0, float(V(lam * r + 1.0)), rho, scalings.domain_W(r, rho))


def make_Psi(V: SmoothFunction, lam: float, r: float, rho: float) -> SmoothFunction:
    dom = Interval(r - r / (lam * scalings.mu_plus(r, rho)), r + 1.0 / lam)
    return _Psi(make_W(V, r, lam, rho), lam, r, dom)


def make_Phi(U: SmoothFunction, mu: float, y: float, r: float, rho: float) -> SmoothFunction:
    dom = Interval(1.0 - y / (mu * scalings.lambda_plus(r, rho)), 1.0 + r / mu)
    return _Phi(make_Z(U, r, y, rho), mu, dom)


@dataclass(frozen=True)
class EpsteinPair:
    """Inverse branches ``U`` on ``J_U`` and ``V`` on ``J_V`` for parameters ``(r, rho)``."""

    U: FuncRep
    V: FuncRep
    r: float
    rho: float
    validate: InitVar[bool] = True

    def __post_init__(self, validate):
        if validate:
            for problem in self.problems():
                raise UsageError(problem)

    def problems(self) -> list[str]:
        """Violated pair invariants, empty when the pair is admissible."""
        out = []
        for name, f, dom in (("U", self.U, scalings.domain_U(self.r, self.rho)),
                             ("V", self.V, scalings.domain_V(self.r, self.rho))):
            if abs(f.domain.lo - dom.lo) > dom.tol or abs(f.domain.hi - dom.hi) > dom.tol:
                out.append(f"{name} lives on {f.domain}, expected {dom}")
                continue
            if abs(f(0.0)) > ZERO_TOL:
                out.append(f"{name}(0) = {f(0.0):.3g} is not zero")
            if is_monotone(f) != 1:
                out.append(f"{name} is not strictly increasing on its nodes")
        return out

    @classmethod
    def identity(cls, r: float, rho: float, degree: int = DEFAULT_DEGREE) -> "EpsteinPair":
        return cls(identity(scalings.domain_U(r, rho), degree),
                   identity(scalings.domain_V(r, rho), degree), r, rho)

    @property
    def degree(self) -> int:
        return self.U.degree


def apply_T(pair: EpsteinPair) -> tuple[EpsteinPair, ScalingState]:
    """One step of the operator; the zero of each branch is pinned exactly.

    Without the pin the value at 0 picks up the interpolation error of the
    composite divided by ``lambda**rho`` each step and drifts off.
    """
    U, V, r, rho = pair.U, pair.V, pair.r, pair.rho
    sc = scalings.solve_scalings(U, V, r, rho)
    psi = make_Psi(V, sc.lam, r, rho)
    phi = make_Phi(U, sc.mu, sc.y, r, rho)
    raw_U = compose(U, psi, domain=U.domain, degree=U.degree)
    raw_V = compose(V, phi, domain=V.domain, degree=V.degree)
    new_U = FuncRep(U.domain, (raw_U.samples - raw_U(0.0)) / sc.lam ** rho)
    new_V = FuncRep(V.domain, (raw_V.samples - raw_V(0.0)) / sc.mu ** rho)
    return EpsteinPair(new_U, new_V, r, rho), sc


def nonlinearity_extremes(pair: EpsteinPair, grid: int = CLASS_GRID) -> tuple[float, float]:
    """Largest nonlinearity of ``Z`` on ``J_Z`` and of ``W`` on ``J_W`` (interior grids)."""
    r, rho = pair.r, pair.rho
    xz = scalings.domain_Z(r, rho).interior_grid(grid)
    xw = scalings.domain_W(r, rho).interior_grid(grid)
    nz = herglotz.root_nonlinearity(pair.U, r + xz, rho)
    nw = herglotz.root_nonlinearity(pair.V, 1.0 + xw, rho)
    return float(nz.max()), float(nw.max())


def decoupled_residuals(pair: EpsteinPair, sc: ScalingState,
                        n_grid: int = CONVERGENCE_GRID) -> tuple[float, float]:
    """Sup-norm residuals of the two fixed-point equations, each relative to sup|U| or sup|V|."""
    r, rho = pair.r, pair.rho
    psi = make_Psi(pair.V, sc.lam, r, rho)
    phi = make_Phi(pair.U, sc.mu, sc.y, r, rho)
    xu, xv = pair.U.domain.grid(n_grid), pair.V.domain.grid(n_grid)
    u, v = pair.U(xu), pair.V(xv)
    res_u = np.max(np.abs(sc.lam ** rho * u - pair.U(psi(xu)))) / np.max(np.abs(u))
    res_v = np.max(np.abs(sc.mu ** rho * v - pair.V(phi(xv)))) / np.max(np.abs(v))
    return float(res_u), float(res_v)


@dataclass(frozen=True)
class IterationRecord:
    n: int
    lambda_n: float
    mu_n: float
    y_n: float
    sup_diff_U: float
    sup_diff_V: float
    max_N_Z: float
    max_N_W: float
    ratio_n: float

    @property
    def sup_diff(self) -> float:
        return max(self.sup_diff_U, self.sup_diff_V)


@dataclass
class IterationTrace:
    records: list[IterationRecord] = field(default_factory=list)
    sigma: float = math.nan
    gamma: float = math.nan
    final_max_N_Z: float = math.nan
    final_max_N_W: float = math.nan

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def converged_at(self) -> Optional[int]:
        return self.records[-1].n if self.records else None

    def class_violations(self, slack: float = herglotz.SIGN_SLACK) -> list[int]:
        """Iterates whose Z or W nonlinearity exceeds its bound."""
        return [rec.n for rec in self.records
                if rec.max_N_Z > self.sigma + slack or rec.max_N_W > self.gamma + slack]

    def summary(self) -> dict:
        last = self.records[-1] if self.records else None
        return {
            "iterations": len(self.records),
            "final_sup_diff": last.sup_diff if last else None,
            "sigma": self.sigma,
            "gamma": self.gamma,
            "max_N_Z": max((r.max_N_Z for r in self.records), default=None),
            "max_N_W": max((r.max_N_W for r in self.records), default=None),
            "class_violations": len(self.class_violations()),
        }


def iterate(pair0: EpsteinPair, tol: float = 1e-12, max_iter: int = 200, *,
            enforce_class: bool = False, delta: float = herglotz.DEFAULT_DELTA,
            epsilon: float = herglotz.DEFAULT_EPSILON,
            n_grid: int = CONVERGENCE_GRID,
            stall_window: Optional[int] = STALL_WINDOW) -> tuple[EpsteinPair, ScalingState, IterationTrace]:
    """Iterate the operator from ``pair0`` until successive iterates agree to ``tol``.

    Every record carries the scalings and nonlinearity extremes of the
    iterate entering that step.  With ``enforce_class`` a nonlinearity above
    its bound raises :class:`InvariantError`; otherwise it is only recorded.
    If the sup-difference has not improved for ``stall_window`` steps while
    still more than ``STALL_FACTOR * tol`` the iteration gives up early.
    Stalls closer to ``tol`` are rounding noise and run on to ``max_iter``,
    since a noisy step can still land below ``tol``.
    """
    if tol <= 0:
        raise UsageError("tol must be positive")
    r, rho = pair0.r, pair0.rho
    bounds = herglotz.bounds_sigma_gamma(r, rho, delta, epsilon)
    trace = IterationTrace(sigma=bounds.sigma, gamma=bounds.gamma)
    pair, prev = pair0, math.nan
    best, n_best = math.inf, 0
    for n in range(max_iter):
        new, sc = apply_T(pair)
        nz, nw = nonlinearity_extremes(pair)
        if not sc.brackets_hold():
            raise InvariantError(f"scalings left their brackets at iterate {n}", n=n,
                                 scalings=sc.to_dict(), trace=trace)
        if enforce_class and (nz > bounds.sigma + herglotz.SIGN_SLACK
                              or nw > bounds.gamma + herglotz.SIGN_SLACK):
            raise InvariantError(f"nonlinearity class left at iterate {n}", n=n, max_N_Z=nz,
                                 max_N_W=nw, sigma=bounds.sigma, gamma=bounds.gamma, trace=trace)
        du = sup_diff(new.U, pair.U, n_grid)
        dv = sup_diff(new.V, pair.V, n_grid)
        d = max(du, dv)
        trace.records.append(IterationRecord(n, sc.lam, sc.mu, sc.y, du, dv, nz, nw,
                                             d / prev if prev > 0 else math.nan))
        prev = d
        pair = new
        if d < best:
            best, n_best = d, n
        elif (stall_window is not None and n - n_best >= stall_window
              and best > STALL_FACTOR * tol):
            raise NonConvergenceError(
                f"stalled: sup-difference stuck above {best:.3g} (tol {tol:g}) for {stall_window} steps",
                best_sup_diff=best, last_sup_diff=d, trace=trace,
            )
        if d <= tol:
            final = scalings.solve_scalings(pair.U, pair.V, r, rho)
            trace.final_max_N_Z, trace.final_max_N_W = nonlinearity_extremes(pair)
            res = decoupled_residuals(pair, final, n_grid)
            if max(res) > 10 * tol:
                raise InvariantError(
                    f"fixed-point residual {max(res):.3g} exceeds 10*tol after convergence",
                    residual_U=res[0], residual_V=res[1], trace=trace,
                )
            return pair, final, trace
    raise NonConvergenceError(
        f"no convergence to {tol:g} within {max_iter} iterations", max_iter=max_iter,
        best_sup_diff=best, last_sup_diff=prev, trace=trace,
    )
