"""Real-slice checks for Herglotz-Pick classes and nonlinearity bounds.

Holomorphy on the slit plane cannot be certified numerically, so membership
is tested through the real-slice consequences the iteration relies on:
monotonicity, non-negative third derivative and Schwarzian, the two-sided
bounds on ``f'/f`` and ``f''``, and the sign of the nonlinearity of
``(f(c + x))**(1/rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BlowUpError, DomainError, UsageError
from .funcrep import Interval, SmoothFunction

DEFAULT_GRID = 200
SIGN_SLACK = 1e-8
DEFAULT_DELTA = 0.05
DEFAULT_EPSILON = 0.05


@dataclass(frozen=True)
class HerglotzReport:
    is_increasing: bool
    zero_value: float
    min_first_derivative: float
    min_third_derivative: float
    min_schwarzian: float
    first_der_bound_margin: float
    second_der_bound_margin: float
    grid_size: int

    def passed(self, slack: float = SIGN_SLACK, *, require_margins: bool = True) -> bool:
        ok = (
            self.is_increasing
            and abs(self.zero_value) <= 1e-10
            and self.min_third_derivative >= -slack
            and self.min_schwarzian >= -slack
        )
        if require_margins:
            ok = ok and self.first_der_bound_margin >= -slack and self.second_der_bound_margin >= -slack
        return bool(ok)


@dataclass(frozen=True)
class NonlinearityBounds:
    sigma: float
    gamma: float
    sigma_floor: float
    gamma_floor: float
    delta: float
    epsilon: float


class ClassCheck(NamedTuple):
    inside: bool
    worst_margin: float
    worst_x: float


def check_omega(f: SmoothFunction, J: Interval, c_zero: float = 0.0,
                grid: int = DEFAULT_GRID) -> HerglotzReport:
    """Evaluate the real-slice Herglotz conditions for ``f`` on ``J``.

    ``J`` is read as ``(c_zero - a, c_zero + b)``; the bounds are the
    classical ones for functions vanishing at ``c_zero``.
    """
    if grid < 100:
        raise UsageError("grid must contain at least 100 points")
    x = J.interior_grid(grid)
    dom = f.domain
    if x[0] < dom.lo - dom.tol or x[-1] > dom.hi + dom.tol:
        raise UsageError(f"evaluation grid of {J} not inside the domain {dom}")
    a, b = c_zero - J.lo, J.hi - c_zero
    j = f.jet(x, 3)
    f0, f1, f2, f3 = j
    N = f2 / f1
    schwarzian = f3 / f1 - 1.5 * N ** 2

    u = x - c_zero
    keep = np.abs(u) > 1e-9 * J.width
    s = u[keep] * f1[keep] / f0[keep]
    low, high = a / (a + u[keep]), b / (b - u[keep])
    pos = u[keep] > 0
    margin1 = np.where(pos, np.minimum(s - low, high - s), np.minimum(low - s, s - high))
    margin2 = np.minimum(N + 2.0 / (a + u), 2.0 / (b - u) - N)

    return HerglotzReport(
        is_increasing=bool(np.all(f1 > 0)),
        zero_value=float(f(c_zero)) if dom.contains(c_zero, dom.tol) else float("nan"),
        min_first_derivative=float(f1.min()),
        min_third_derivative=float(f3.min()),
        min_schwarzian=float(schwarzian.min()),
        first_der_bound_margin=float(margin1.min()),
        second_der_bound_margin=float(margin2.min()),
        grid_size=len(x),
    )


def root_nonlinearity(f: SmoothFunction, points, rho: float):
    """Nonlinearity of ``f**(1/rho)`` at ``points`` (``f`` must be positive there)."""
    f0, f1, f2 = f.jet(points, 2)
    if np.any(f0 <= 0):
        bad = np.asarray(points)[np.argmax(f0 <= 0)]
        raise DomainError(f"f <= 0 at x={bad!r} where positivity is required", x=bad)
    return f2 / f1 + (1.0 / rho - 1.0) * f1 / f0


def check_nonlinearity_class(f: SmoothFunction, c: float, sigma: float, rho: float, J: Interval,
                             grid: int = DEFAULT_GRID) -> ClassCheck:
    """Is ``N[(f(c + x))**(1/rho)] < sigma`` on the interior of ``(-c, J.hi - c)``?

    Returns the flag, the largest ``N - sigma`` on the grid and where it sits.
    """
    if rho <= 1:
        raise UsageError("rho must exceed 1")
    x = Interval(-c, J.hi - c).interior_grid(grid)
    excess = root_nonlinearity(f, c + x, rho) - sigma
    k = int(np.argmax(excess))
    return ClassCheck(bool(excess[k] < 0), float(excess[k]), float(x[k]))


def nonlinearity_growth_bound(N_at_x: float, x: float, y: float) -> float:
    """Lower bound for ``N(y)`` given ``N(x)``, valid for ``y >= x`` and constant-sign ``N``."""
    if y < x:
        raise UsageError("need y >= x")
    den = 2.0 - N_at_x * (y - x)
    if den <= 0:
        raise BlowUpError("bound is vacuous: 2 - N(x)(y - x) <= 0", denominator=den)
    return 2.0 * N_at_x / den


def derivative_growth_bound(fprime_at_x: float, N_at_x: float, x: float, y: float) -> float:
    """Lower bound ``4 f'(x) / (2 - N(x)(y - x))**2`` for ``f'(y)``."""
    if y < x:
        raise UsageError("need y >= x")
    den = 2.0 - N_at_x * (y - x)
    if den <= 0:
        raise BlowUpError("bound is vacuous: 2 - N(x)(y - x) <= 0", denominator=den)
    return 4.0 * fprime_at_x / den ** 2


def bounds_sigma_gamma(r: float, rho: float, delta: float = DEFAULT_DELTA,
                       epsilon: float = DEFAULT_EPSILON) -> NonlinearityBounds:
    """Upper bounds on the nonlinearities of Z at 1/lambda_+ and W at r/mu_+.

    ``delta = 0`` (resp. ``epsilon = 0``) collapses the bound onto the floor
    implied by the second-derivative estimate.
    """
    from .scalings import lambda_plus, mu_plus

    if r <= 0 or rho <= 1:
        raise UsageError("need r > 0 and rho > 1", r=r, rho=rho)
    if not (0 <= delta < 2 and 0 <= epsilon < 2):
        raise UsageError("delta and epsilon must lie in [0, 2)", delta=delta, epsilon=epsilon)
    span_z = r + 1.0 / lambda_plus(r, rho)
    span_w = 1.0 + r / mu_plus(r, rho)
    return NonlinearityBounds(
        sigma=-(2.0 - delta) / span_z,
        gamma=-(2.0 - epsilon) / span_w,
        sigma_floor=-2.0 / span_z,
        gamma_floor=-2.0 / span_w,
        delta=delta,
        epsilon=epsilon,
    )
