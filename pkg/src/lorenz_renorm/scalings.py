"""Scaling parameters of the decoupled operator.

Closed-form brackets for the two scalings and the three monotone scalar
equations that pin down ``y``, ``lambda`` and ``mu`` for a given pair
``(U, V)``.  All solves go through :func:`lorenz_renorm.roots.find_root`,
which never leaves its sign-change bracket.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import BracketError, DomainError, InconsistentInputError, UsageError
from .funcrep import Interval, SmoothFunction
from .roots import find_root

ROOT_XTOL = 1e-15
MU_RESIDUAL_TOL = 1e-12


def _check_params(r: float, rho: float) -> None:
    if not (r > 0 and math.isfinite(r)):
        raise UsageError(f"r must be positive, got {r!r}", r=r)
    if not (rho > 1 and math.isfinite(rho)):
        raise UsageError(f"rho must exceed 1, got {rho!r}", rho=rho)


def lambda_plus(r: float, rho: float) -> float:
    _check_params(r, rho)
    return (r / (r + 1.0)) ** (1.0 / rho)


def mu_plus(r: float, rho: float) -> float:
    _check_params(r, rho)
    return (1.0 / (r + 1.0) ** 2) ** (1.0 / rho)


def y_floor(r: float, mu: float) -> float:
    """Lower bound on ``y`` valid when ``U`` has a concave rho-th root."""
    return (math.sqrt(r * r + 4.0 * (r + mu)) - r) / 2.0


def lambda_minus(r: float, rho: float) -> float:
    lp, mp = lambda_plus(r, rho), mu_plus(r, rho)
    s = math.sqrt(mp)
    base = (r / rho) * (1.0 - s * lp) / ((lp * r + 1.0) * (1.0 + s * lp * lp * r))
    return base ** (1.0 / (rho - 1.0))


def mu_minus(r: float, rho: float) -> float:
    # the y floor is taken at mu = mu_plus
    lp, mp = lambda_plus(r, rho), mu_plus(r, rho)
    yl = y_floor(r, mp)
    num = yl * r * r / rho ** 2 * (1.0 - lp * mp) ** 2
    den = (r + 1.0) * (r + mp) * (r + lp * mp) * (r + lp * mp * mp)
    return (num / den) ** (1.0 / (rho - 1.0))


# domains on which U, V and their root-normalized translates live

def domain_U(r: float, rho: float) -> Interval:
    lp, mp = lambda_plus(r, rho), mu_plus(r, rho)
    return Interval(r - r / (lp * mp), r + 1.0 / lp)


def domain_V(r: float, rho: float) -> Interval:
    lp, mp = lambda_plus(r, rho), mu_plus(r, rho)
    return Interval(1.0 - 1.0 / (lp * math.sqrt(mp)), 1.0 + r / mp)


def domain_Z(r: float, rho: float) -> Interval:
    return Interval(-r, 1.0 / lambda_plus(r, rho))


def domain_W(r: float, rho: float) -> Interval:
    return Interval(-1.0, r / mu_plus(r, rho))


@dataclass(frozen=True)
class ScalingState:
    lam: float
    mu: float
    y: float
    a: float
    b: float
    lambda_lo: float
    lambda_hi: float
    mu_lo: float
    mu_hi: float
    y_floor: float

    def brackets_hold(self) -> bool:
        return (self.lambda_lo < self.lam < self.lambda_hi
                and self.mu_lo < self.mu < self.mu_hi
                and self.mu < self.y < 1.0
                and self.a > 0 and self.b > 0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


def _scalar(f: SmoothFunction, x: float, order: int = 1):
    return [float(v) for v in f.jet(x, order)]


def solve_y(U: SmoothFunction, r: float, mu: float, rho: float) -> float:
    """Root ``y`` in ``(mu, 1)`` of ``y**rho * U(r + y) = U(r + mu)``."""
    _check_params(r, rho)
    if not 0 < mu < 1:
        raise UsageError(f"mu must lie in (0, 1), got {mu!r}", mu=mu)
    target = float(U(r + mu))

    def f(y):
        return y ** rho * float(U(r + y)) - target

    def fp(y):
        u0, u1 = _scalar(U, r + y)
        return rho * y ** (rho - 1) * u0 + y ** rho * u1

    f_lo, f_hi = f(mu), f(1.0)
    if not (f_lo < 0 < f_hi):
        raise InconsistentInputError(
            f"y-equation has no root in (mu, 1): f(mu)={f_lo:.3g}, f(1)={f_hi:.3g}",
            mu=mu, f_mu=f_lo, f_one=f_hi,
        )
    scale = abs(float(U(r + 1.0)))
    return find_root(f, mu, 1.0, fprime=fp, xtol=ROOT_XTOL, ftol=1e-14 * scale)


def lambda_residual(V: SmoothFunction, r: float, rho: float, lam: float) -> float:
    v0, v1 = _scalar(V, lam * r + 1.0)
    return lam ** (rho - 1.0) - (r / rho) * v1 / v0


def solve_lambda(V: SmoothFunction, r: float, rho: float) -> float:
    """Scaling ``lambda`` fixed by ``Psi'(0) = lambda**rho``."""
    lo, hi = lambda_minus(r, rho), lambda_plus(r, rho)

    def f(lam):
        return lambda_residual(V, r, rho, lam)

    def fp(lam):
        v0, v1, v2 = _scalar(V, lam * r + 1.0, 2)
        q = v1 / v0
        return (rho - 1.0) * lam ** (rho - 2.0) - (r * r / rho) * (v2 / v0 - q * q)

    f_lo, f_hi = f(lo), f(hi)
    if not (f_lo <= 0 <= f_hi):
        raise BracketError(
            f"lambda-equation does not change sign on [{lo:.6g}, {hi:.6g}] "
            f"(values {f_lo:.3g}, {f_hi:.3g})",
            r=r, rho=rho, lo=lo, hi=hi, f_lo=f_lo, f_hi=f_hi,
        )
    return find_root(f, lo, hi, fprime=fp, xtol=ROOT_XTOL, ftol=1e-15)


def mu_residual(U: SmoothFunction, r: float, rho: float, mu: float) -> tuple[float, float]:
    """Value of ``mu**(rho-1) - Z'(y) Z'(mu)`` with ``y`` solved for this ``mu``."""
    y = solve_y(U, r, mu, rho)
    uy0, uy1 = _scalar(U, r + y)
    um0, um1 = _scalar(U, r + mu)
    return mu ** (rho - 1.0) - y * uy1 * um1 / (rho * rho * uy0 * um0), y


def solve_mu(U: SmoothFunction, r: float, rho: float) -> tuple[float, float]:
    """Scaling ``mu`` fixed by ``Phi'(0) = mu**rho``, with its matching ``y``."""
    lo, hi = mu_minus(r, rho), mu_plus(r, rho)
    g_lo, g_hi = mu_residual(U, r, rho, lo)[0], mu_residual(U, r, rho, hi)[0]
    if not (g_lo <= 0 <= g_hi):
        raise BracketError(
            f"mu-equation does not change sign on [{lo:.6g}, {hi:.6g}] "
            f"(values {g_lo:.3g}, {g_hi:.3g})",
            r=r, rho=rho, lo=lo, hi=hi, g_lo=g_lo, g_hi=g_hi,
        )
    mu = find_root(lambda m: mu_residual(U, r, rho, m)[0], lo, hi, xtol=ROOT_XTOL,
                   ftol=0.1 * MU_RESIDUAL_TOL)
    return mu, solve_y(U, r, mu, rho)


def normalizations(U: SmoothFunction, V: SmoothFunction, r: float, lam: float, y: float,
                   rho: float) -> tuple[float, float]:
    """Affine normalizations ``a = 1/U(r+y)`` and ``b = r**rho / V(lam*r + 1)``."""
    u, v = float(U(r + y)), float(V(lam * r + 1.0))
    if u <= 0 or v <= 0:
        raise DomainError("normalization denominator is not positive", U_ry=u, V_lr1=v)
    return 1.0 / u, r ** rho / v


def solve_scalings(U: SmoothFunction, V: SmoothFunction, r: float, rho: float) -> ScalingState:
    lam = solve_lambda(V, r, rho)
    mu, y = solve_mu(U, r, rho)
    a, b = normalizations(U, V, r, lam, y, rho)
    return ScalingState(
        lam=lam, mu=mu, y=y, a=a, b=b,
        lambda_lo=lambda_minus(r, rho), lambda_hi=lambda_plus(r, rho),
        mu_lo=mu_minus(r, rho), mu_hi=mu_plus(r, rho),
        y_floor=y_floor(r, mu),
    )
