"""Smooth real functions on closed intervals.

The workhorse is :class:`FuncRep`, a polynomial interpolant at Chebyshev
points of the second kind evaluated with the barycentric formula.  Anything
the operator manipulates (interpolants, closed forms, the root-normalized
translates built in :mod:`lorenz_renorm.renorm_op`) implements the small
:class:`SmoothFunction` interface: a domain plus a ``jet`` method returning
the value and the first few derivatives at a batch of points.  Chain rules on
jets (:func:`compose_jet`, :func:`power_jet`) let composite maps report
exact derivatives without being re-interpolated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as cheb

from .errors import (
    CompositionError,
    ConstructionError,
    DomainError,
    PreconditionError,
    RangeError,
    SingularDerivativeError,
    UsageError,
)
from .roots import find_root

DEFAULT_DEGREE = 64
EVAL_TOL = 1e-12
COMPOSE_TOL = 1e-10
NONLINEARITY_SHRINK = 0.01
_CHOP = 16 * np.finfo(float).eps


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]`` with ``lo < hi``."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
            raise UsageError(f"invalid interval [{self.lo}, {self.hi}]", lo=self.lo, hi=self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def tol(self) -> float:
        """Absolute slack accepted beyond the end points before clamping."""
        return EVAL_TOL * max(1.0, abs(self.lo), abs(self.hi))

    def contains(self, x, tol: float = 0.0):
        return (x >= self.lo - tol) & (x <= self.hi + tol)

    def grid(self, n: int) -> np.ndarray:
        """``n`` uniformly spaced points including both end points."""
        return np.linspace(self.lo, self.hi, n)

    def interior_grid(self, n: int) -> np.ndarray:
        """``n`` uniformly spaced points strictly inside the interval."""
        return np.linspace(self.lo, self.hi, n + 2)[1:-1]

    def shrink(self, fraction: float) -> "Interval":
        pad = fraction * self.width
        return Interval(self.lo + pad, self.hi - pad)

    def intersect(self, other: "Interval") -> "Interval":
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if not lo < hi:
            raise UsageError(f"domains {self} and {other} do not overlap")
        return Interval(lo, hi)

    def __iter__(self):
        yield self.lo
        yield self.hi


# --------------------------------------------------------------------------
# jets: rows are f, f', f'', f''' evaluated on a common point set
# --------------------------------------------------------------------------

def compose_jet(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Jet of ``F∘G`` from the jet of ``F`` taken at ``G(x)`` and the jet of ``G``.

    Faà di Bruno up to third order.
    """
    order = min(len(outer), len(inner)) - 1
    out = np.empty((order + 1,) + np.shape(inner[0]))
    out[0] = outer[0]
    if order >= 1:
        out[1] = outer[1] * inner[1]
    if order >= 2:
        out[2] = outer[2] * inner[1] ** 2 + outer[1] * inner[2]
    if order >= 3:
        out[3] = (outer[3] * inner[1] ** 3 + 3 * outer[2] * inner[1] * inner[2]
                  + outer[1] * inner[3])
    return out


def power_jet(u: np.ndarray, p: float) -> np.ndarray:
    """Jet of ``u**p`` for positive ``u``."""
    order = len(u) - 1
    u0 = u[0]
    outer = [u0 ** p]
    coef = 1.0
    for k in range(1, order + 1):
        coef *= p - k + 1
        outer.append(coef * u0 ** (p - k))
    return compose_jet(np.array(outer), u)


def affine_jet(inner: np.ndarray, scale: float, shift: float = 0.0) -> np.ndarray:
    """Jet of ``shift + scale * G``."""
    out = scale * np.asarray(inner, dtype=float)
    out[0] = out[0] + shift
    return out


class SmoothFunction:
    """Interface: a real function on ``domain`` with derivatives up to order 3."""

    domain: Interval

    def jet(self, x, order: int = 2) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        out = self.jet(x, 0)[0]
        return float(out) if np.ndim(out) == 0 else out

    def deriv(self, x, k: int = 1):
        out = self.jet(x, k)[k]
        return float(out) if np.ndim(out) == 0 else out

    def nonlinearity_at(self, x):
        j = self.jet(x, 2)
        out = j[2] / j[1]
        return float(out) if np.ndim(out) == 0 else out


class Analytic(SmoothFunction):
    """Closed-form function given by its derivative callables ``[f, f', f'', ...]``."""

    def __init__(self, domain: Interval, derivatives: Sequence[Callable]):
        self.domain = domain
        self.derivatives = tuple(derivatives)

    def jet(self, x, order=2):
        if order >= len(self.derivatives):
            raise UsageError(f"closed form carries only {len(self.derivatives) - 1} derivatives")
        x = np.asarray(x, dtype=float)
        return np.array([np.broadcast_to(self.derivatives[k](x), x.shape) for k in range(order + 1)])


# --------------------------------------------------------------------------
# Chebyshev interpolant
# --------------------------------------------------------------------------

def _reference_nodes(degree: int) -> np.ndarray:
    # sine form of -cos(pi j / n): exactly symmetric, exact zero in the middle
    return np.sin(np.pi * (2 * np.arange(degree + 1) - degree) / (2 * degree))


def chebyshev_nodes(domain: Interval, degree: int) -> np.ndarray:
    """Chebyshev points of the second kind on ``domain``, ascending."""
    t = _reference_nodes(degree)
    x = 0.5 * (domain.lo + domain.hi) + 0.5 * domain.width * t
    x[0], x[-1] = domain.lo, domain.hi
    return x


def _barycentric_weights(degree: int) -> np.ndarray:
    w = np.ones(degree + 1)
    w[1::2] = -1.0
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def _values_to_coeffs(values: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients (in t on [-1, 1]) from values at ascending nodes."""
    v = values[::-1]
    n = len(v) - 1
    ext = np.concatenate([v, v[-2:0:-1]])
    c = np.fft.rfft(ext).real / n
    c[0] *= 0.5
    c[n] *= 0.5
    return c[: n + 1]


class FuncRep(SmoothFunction):
    """Polynomial interpolant of degree ``degree`` on ``domain``.

    Immutable; derivatives are computed lazily and cached.
    """

    def __init__(self, domain: Interval, samples):
        samples = np.array(samples, dtype=float)
        if samples.ndim != 1 or len(samples) < 2:
            raise UsageError("samples must be a 1-d array with at least two entries")
        bad = np.flatnonzero(~np.isfinite(samples))
        if bad.size:
            node = chebyshev_nodes(domain, len(samples) - 1)[bad[0]]
            raise ConstructionError(f"non-finite sample at node x={node!r}", node=node)
        samples.setflags(write=False)
        self.domain = domain
        self.samples = samples

    @classmethod
    def build(cls, f: Callable, domain: Interval, degree: int = DEFAULT_DEGREE) -> "FuncRep":
        """Interpolate ``f`` (vectorized or scalar callable) at ``degree + 1`` nodes."""
        if degree < 8:
            raise UsageError(f"degree must be at least 8, got {degree}")
        x = chebyshev_nodes(domain, degree)
        try:
            values = np.asarray(f(x), dtype=float)
            if values.shape != x.shape:
                values = np.broadcast_to(values, x.shape).astype(float)
        except (TypeError, ValueError):
            values = np.array([float(f(xi)) for xi in x])
        return cls(domain, values)

    @property
    def degree(self) -> int:
        return len(self.samples) - 1

    @cached_property
    def nodes(self) -> np.ndarray:
        return chebyshev_nodes(self.domain, self.degree)

    @cached_property
    def _weights(self) -> np.ndarray:
        return _barycentric_weights(self.degree)

    @cached_property
    def coefficients(self) -> np.ndarray:
        return _values_to_coeffs(self.samples)

    def _check(self, x: np.ndarray) -> np.ndarray:
        d = self.domain
        tol = d.tol
        if np.any(x < d.lo - tol) or np.any(x > d.hi + tol) or np.any(np.isnan(x)):
            bad = x[(x < d.lo - tol) | (x > d.hi + tol) | np.isnan(x)].flat[0]
            raise DomainError(f"x={bad!r} outside domain [{d.lo!r}, {d.hi!r}]",
                              x=bad, domain=(d.lo, d.hi))
        return np.clip(x, d.lo, d.hi)

    def _basis(self, x: np.ndarray) -> np.ndarray:
        """Barycentric Lagrange basis at points ``x``; shape ``x.shape + (n+1,)``."""
        diff = x[..., None] - self.nodes
        # points within a few ulps of a node take the node value; the
        # barycentric quotient would overflow there
        exact = np.abs(diff) <= 4 * np.finfo(float).eps * max(1.0, abs(self.domain.lo), abs(self.domain.hi))
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            terms = self._weights / diff
            basis = terms / terms.sum(axis=-1, keepdims=True)
        hit = exact.any(axis=-1)
        if np.any(hit):
            basis[hit] = exact[hit].astype(float)
        return basis

    def _derivative_samples(self, order: int) -> np.ndarray:
        return self.derivative(order).samples if order else self.samples

    def jet(self, x, order=2):
        if order > 3:
            raise UsageError("jets are available up to order 3")
        x = self._check(np.asarray(x, dtype=float))
        basis = self._basis(x)
        stack = np.stack([self._derivative_samples(k) for k in range(order + 1)], axis=-1)
        return np.moveaxis(basis @ stack, -1, 0)

    def derivative(self, order: int = 1) -> "FuncRep":
        """Spectral derivative of the interpolant, same domain and node set."""
        if order not in (0, 1, 2, 3):
            raise UsageError(f"derivative order must be 1, 2 or 3, got {order}")
        if order == 0:
            return self
        if self.degree < order + 4:
            raise UsageError(f"degree {self.degree} too low for derivative of order {order}")
        cache = self.__dict__.setdefault("_deriv_cache", {})
        if order not in cache:
            c = self.coefficients.copy()
            c[np.abs(c) < _CHOP * np.max(np.abs(c))] = 0.0
            dc = cheb.chebder(c, m=order, scl=2.0 / self.domain.width)
            t = _reference_nodes(self.degree)
            cache[order] = FuncRep(self.domain, cheb.chebval(t, dc))
        return cache[order]

    def __repr__(self):
        return f"FuncRep(domain=[{self.domain.lo:.6g}, {self.domain.hi:.6g}], degree={self.degree})"


def build(f: Callable, domain: Interval, degree: int = DEFAULT_DEGREE) -> FuncRep:
    return FuncRep.build(f, domain, degree)


def derivative(f: FuncRep, order: int = 1) -> FuncRep:
    return f.derivative(order)


def compose(outer: SmoothFunction, inner: SmoothFunction, *, domain: Interval | None = None,
            degree: int | None = None, tol: float = COMPOSE_TOL) -> FuncRep:
    """Interpolant of ``outer∘inner`` on ``domain`` (default: inner's domain).

    The inner values at the new node set must lie in ``outer.domain`` up to
    ``tol``; small overshoots are clamped, larger ones raise.
    """
    domain = inner.domain if domain is None else domain
    if degree is None:
        degree = max(getattr(outer, "degree", DEFAULT_DEGREE), getattr(inner, "degree", DEFAULT_DEGREE))
    x = chebyshev_nodes(domain, degree)
    inner_vals = np.asarray(inner(x), dtype=float)
    od = outer.domain
    overshoot = np.maximum(od.lo - inner_vals, inner_vals - od.hi)
    worst = int(np.argmax(overshoot))
    if overshoot[worst] > tol:
        raise CompositionError(
            f"inner range escapes outer domain [{od.lo!r}, {od.hi!r}] by {overshoot[worst]:.3g} "
            f"at node x={x[worst]!r}",
            node=x[worst], value=inner_vals[worst], overshoot=overshoot[worst],
        )
    return FuncRep(domain, outer(np.clip(inner_vals, od.lo, od.hi)))


def is_monotone(f: FuncRep) -> int:
    """+1 if strictly increasing on the node grid, -1 if decreasing, 0 otherwise.

    Samples must be strictly monotone and the derivative must not change
    sign at the nodes; isolated zeros of the derivative are allowed.
    """
    d = f.derivative(1).samples
    step = np.diff(f.samples)
    slack = 1e-12 * np.max(np.abs(d))
    if np.all(step > 0) and np.all(d >= -slack):
        return 1
    if np.all(step < 0) and np.all(d <= slack):
        return -1
    return 0


def invert_monotone(f: FuncRep, target: float, *, tol: float = 1e-12) -> float:
    """Solve ``f(x) = target`` for strictly monotone ``f``.

    The result satisfies ``|f(x) - target| <= tol * max(1, |target|)``.
    """
    direction = is_monotone(f)
    if direction == 0:
        raise PreconditionError("function is not strictly monotone on its node grid")
    lo, hi = f.domain
    flo, fhi = f(lo), f(hi)
    vmin, vmax = min(flo, fhi), max(flo, fhi)
    ftol = tol * max(1.0, abs(target))
    if target < vmin - ftol or target > vmax + ftol:
        raise RangeError(f"target {target!r} outside range [{vmin!r}, {vmax!r}]",
                         target=target, range=(vmin, vmax))
    if abs(target - flo) <= 0.25 * ftol:
        return lo
    if abs(target - fhi) <= 0.25 * ftol:
        return hi
    d1 = f.derivative(1)
    return find_root(lambda x: f(x) - target, lo, hi, fprime=d1, xtol=1e-15 * max(1.0, abs(lo), abs(hi)),
                     ftol=0.25 * ftol)


def sup_diff(f: SmoothFunction, g: SmoothFunction, n_grid: int = 256) -> float:
    """Max of ``|f - g|`` over ``n_grid`` uniform points of the common domain."""
    if n_grid < 2:
        raise UsageError("n_grid must be at least 2")
    x = f.domain.intersect(g.domain).grid(n_grid)
    return float(np.max(np.abs(f(x) - g(x))))


def nonlinearity(f: FuncRep, *, shrink: float = NONLINEARITY_SHRINK) -> FuncRep:
    """Interpolant of ``f''/f'`` on the domain trimmed by ``shrink`` at each end."""
    domain = f.domain.shrink(shrink)
    x = chebyshev_nodes(domain, f.degree)
    j = f.jet(x, 2)
    small = np.abs(j[1]) < 1e-10
    if np.any(small):
        where = x[np.argmax(small)]
        raise SingularDerivativeError(f"|f'| < 1e-10 at x={where!r}", x=where)
    return FuncRep(domain, j[2] / j[1])


def identity(domain: Interval, degree: int = DEFAULT_DEGREE) -> FuncRep:
    return FuncRep.build(lambda x: x, domain, degree)
