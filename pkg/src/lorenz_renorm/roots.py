"""Bracketed scalar root finding.

One routine, :func:`find_root`, used by every scalar solve in the package.
It keeps a sign-change bracket at all times and only accepts an accelerated
step (Newton when a derivative is supplied, Illinois regula falsi otherwise)
when that step lands strictly inside the current bracket and the bracket
has at least halved over the last two steps; otherwise it bisects.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

from .errors import BracketError, NonConvergenceError


def find_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    fprime: Optional[Callable[[float], float]] = None,
    xtol: float = 1e-13,
    ftol: float = 0.0,
    maxiter: int = 200,
) -> float:
    """Return a root of ``f`` inside ``[lo, hi]``.

    Parameters
    ----------
    f : callable
        Continuous scalar function with ``f(lo)`` and ``f(hi)`` of opposite
        sign.
    lo, hi : float
        Bracket end points.
    fprime : callable, optional
        Derivative of ``f``; enables safeguarded Newton steps.
    xtol : float
        Absolute tolerance on the root location.
    ftol : float
        Early exit once ``|f(x)| <= ftol``.
    maxiter : int
        Iteration cap.

    Raises
    ------
    BracketError
        If the end-point values have the same sign.
    NonConvergenceError
        If the root is not located to ``xtol`` within ``maxiter`` steps.
    """
    lo, hi = float(lo), float(hi)
    flo, fhi = f(lo), f(hi)
    if not (math.isfinite(flo) and math.isfinite(fhi)):
        raise BracketError("non-finite value at bracket end", lo=lo, hi=hi, flo=flo, fhi=fhi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(f"no sign change on [{lo!r}, {hi!r}]", lo=lo, hi=hi, flo=flo, fhi=fhi)

    # invariant: f(a) < 0 < f(b)
    if flo < 0:
        a, fa, b, fb = lo, flo, hi, fhi
    else:
        a, fa, b, fb = hi, fhi, lo, flo
    widths = [abs(b - a)] * 2
    x, fx = None, None
    retained = 0  # Illinois: +1 if b was kept last step, -1 if a was kept
    for _ in range(maxiter):
        width = abs(b - a)
        if width <= xtol:
            return x if x is not None else 0.5 * (a + b)

        cand = math.nan
        if fprime is not None:
            if x is not None:
                d = fprime(x)
                if d != 0.0 and math.isfinite(d):
                    step = fx / d
                    if abs(step) <= 0.5 * xtol and min(a, b) <= x - step <= max(a, b):
                        return x - step
                    cand = x - step
        elif fb != fa:
            cand = (a * fb - b * fa) / (fb - fa)

        if not (min(a, b) < cand < max(a, b)) or width > 0.5 * widths[0]:
            cand = 0.5 * (a + b)
        widths = [widths[1], width]

        x = cand
        fx = f(x)
        if not math.isfinite(fx):
            raise BracketError("non-finite function value inside bracket", x=x)
        if fx == 0.0 or abs(fx) <= ftol:
            return x
        if fx < 0:
            a, fa = x, fx
            if retained == 1:
                fb *= 0.5
            retained = 1
        else:
            b, fb = x, fx
            if retained == -1:
                fa *= 0.5
            retained = -1
    raise NonConvergenceError(
        f"root not located to {xtol:g} after {maxiter} iterations", lo=a, hi=b
    )
