"""Special functions, adaptive quadrature and bracketed root finding.

Everything here is a pure function of its arguments. The quadrature routine
expects *vectorized* integrands: ``f`` is called with a 1-D ``numpy`` array of
abscissae and must return an array of the same shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import BracketError, ConvergenceError, DomainError

__all__ = [
    "QuadratureResult",
    "RootResult",
    "gauss_q",
    "erf_fn",
    "erfcx_fn",
    "dawson_fn",
    "integrate",
    "find_root",
    "gauss_legendre_nodes",
]

_EPS = np.finfo(float).eps
_SQRT2 = math.sqrt(2.0)

DEFAULT_REL_TOL = 1e-10
DEFAULT_ABS_TOL = 1e-15
DEFAULT_MAX_EVALS = 10**6
DEFAULT_ROOT_TOL = 1e-12


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    est_error: float
    evaluations: int


@dataclass(frozen=True)
class RootResult:
    root: float
    residual: float
    iterations: int


def _check_finite(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"argument must be finite, got {x!r}")
    return arr


def _scalar_or_array(value, like):
    if np.ndim(like) == 0:
        return float(value)
    return value


def gauss_q(x):
    """Gaussian tail probability P(N(0, 1) > x)."""
    arr = _check_finite(x)
    return _scalar_or_array(0.5 * special.erfc(arr / _SQRT2), x)


def erf_fn(x):
    arr = _check_finite(x)
    return _scalar_or_array(special.erf(arr), x)


def erfcx_fn(x):
    """Scaled complementary error function exp(x**2) * erfc(x)."""
    arr = _check_finite(x)
    return _scalar_or_array(special.erfcx(arr), x)


def dawson_fn(x):
    """Dawson's integral exp(-x**2) * integral_0^x exp(t**2) dt."""
    arr = _check_finite(x)
    return _scalar_or_array(special.dawsn(arr), x)


# Gauss-Kronrod 7/15 abscissae on [-1, 1] (positive half, descending) and weights.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
# The 7 Gauss abscissae sit at the odd positions of the 15-point Kronrod set.
_GW = np.zeros(15)
_GW[[1, 3, 5, 7, 9, 11, 13]] = [_WG[0], _WG[1], _WG[2], _WG[3], _WG[2], _WG[1], _WG[0]]


def _panel_rule(g, a, b):
    """Apply the 15-point Kronrod / 7-point Gauss pair to every panel [a_i, b_i]."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    fx = np.asarray(g(x.ravel()), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(fx)):
        raise DomainError("integrand returned a non-finite value")
    kron = half * (fx @ _KW)
    gauss = half * (fx @ _GW)
    absval = np.abs(half) * (np.abs(fx) @ _KW)
    return kron, np.abs(kron - gauss), absval


def _transform(f, lo, hi):
    """Map (possibly) semi-infinite [lo, hi] onto a finite interval."""
    if math.isinf(lo) and math.isinf(hi):
        def g(t):
            # x = t / (1 - t^2) on (-1, 1)
            x = t / (1.0 - t * t)
            return f(x) * (1.0 + t * t) / (1.0 - t * t) ** 2
        return g, -1.0, 1.0, None
    if math.isinf(hi):
        def g(t):
            x = lo + t / (1.0 - t)
            return f(x) / (1.0 - t) ** 2
        return g, 0.0, 1.0, lambda x: (x - lo) / (1.0 + x - lo)
    if math.isinf(lo):
        def g(t):
            x = hi - t / (1.0 - t)
            return f(x) / (1.0 - t) ** 2
        return g, 0.0, 1.0, lambda x: (hi - x) / (1.0 + hi - x)
    return f, lo, hi, lambda x: x


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = DEFAULT_ABS_TOL,
    max_evals: int = DEFAULT_MAX_EVALS,
    points: Sequence[float] | None = None,
) -> QuadratureResult:
    """Adaptive Gauss-Kronrod quadrature of a vectorized integrand.

    Panels are bisected in batches (largest error first) until the summed
    error estimate drops below ``max(rel_tol * |I|, abs_tol)``. Infinite
    endpoints are handled by substitution ``x = lo + t / (1 - t)``.

    Args:
        f: Integrand accepting and returning 1-D float arrays.
        lo, hi: Integration limits, ``lo < hi``; either may be infinite.
        rel_tol: Relative tolerance on the integral.
        abs_tol: Absolute floor on the tolerance.
        max_evals: Budget of integrand evaluations.
        points: Optional interior breakpoints (in ``x`` units).

    Raises:
        ConvergenceError: budget exhausted; ``estimate`` holds the best value.
    """
    lo = float(lo)
    hi = float(hi)
    if math.isnan(lo) or math.isnan(hi) or not lo < hi:
        raise DomainError(f"need lo < hi, got [{lo}, {hi}]")
    g, a0, b0, to_t = _transform(f, lo, hi)
    edges = [a0, b0]
    if points is not None and to_t is not None:
        inner = sorted({float(to_t(p)) for p in points if lo < p < hi})
        edges = [a0, *inner, b0]
    a = np.asarray(edges[:-1], dtype=float)
    b = np.asarray(edges[1:], dtype=float)

    val, err, absval = _panel_rule(g, a, b)
    evals = 15 * a.size
    while True:
        total = float(np.sum(val))
        err_tot = float(np.sum(err))
        target = max(rel_tol * abs(total), abs_tol, 50.0 * _EPS * float(np.sum(absval)))
        if err_tot <= target:
            return QuadratureResult(total, err_tot, evals)
        splittable = np.abs(b - a) > 1e3 * _EPS * np.maximum(np.abs(a), np.abs(b)) + 1e-300
        cand = np.where(splittable)[0]
        if cand.size == 0:
            raise ConvergenceError(
                "quadrature stalled at roundoff level", estimate=total, error=err_tot
            )
        order = cand[np.argsort(err[cand])[::-1]]
        excess = err_tot - target
        cum = np.cumsum(err[order])
        k = int(np.searchsorted(cum, excess)) + 1
        k = min(k, order.size)
        if evals + 30 * k > max_evals:
            k = (max_evals - evals) // 30
            if k <= 0:
                raise ConvergenceError(
                    f"evaluation budget {max_evals} exhausted", estimate=total, error=err_tot
                )
        pick = order[:k]
        keep = np.ones(a.size, dtype=bool)
        keep[pick] = False
        mid = 0.5 * (a[pick] + b[pick])
        na = np.concatenate([a[pick], mid])
        nb = np.concatenate([mid, b[pick]])
        nval, nerr, nabs = _panel_rule(g, na, nb)
        evals += 15 * na.size
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        val = np.concatenate([val[keep], nval])
        err = np.concatenate([err[keep], nerr])
        absval = np.concatenate([absval[keep], nabs])


def gauss_legendre_nodes(edges, order: int = 8):
    """Composite Gauss-Legendre nodes and weights over consecutive panels.

    Returns arrays ``(x, w)`` of length ``order * (len(edges) - 1)``.
    """
    edges = np.asarray(edges, dtype=float)
    t, wt = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    w = (half[:, None] * wt[None, :]).ravel()
    return x, w


def find_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = DEFAULT_ROOT_TOL,
    max_iter: int = 500,
) -> RootResult:
    """Brent's method: bisection safeguarded, secant / inverse-quadratic steps.

    Stops when ``|f(x)| <= tol`` or the bracket has shrunk to a few ulps.

    Raises:
        BracketError: ``f(lo)`` and ``f(hi)`` have the same strict sign.
        ConvergenceError: ``max_iter`` iterations without meeting either test.
    """
    a, b = float(lo), float(hi)
    fa, fb = float(f(a)), float(f(b))
    if math.isnan(fa) or math.isnan(fb):
        raise DomainError("function is NaN at a bracket endpoint")
    if abs(fa) <= tol:
        return RootResult(a, fa, 0)
    if abs(fb) <= tol:
        return RootResult(b, fb, 0)
    if fa * fb > 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={fa:g}, {fb:g}")

    c, fc = a, fa
    d = e = b - a
    for it in range(1, max_iter + 1):
        if (fb > 0) == (fc > 0):
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        xtol = 2.0 * _EPS * abs(b) + 1e-300
        xm = 0.5 * (c - b)
        if abs(fb) <= tol or abs(xm) <= xtol or fb == 0.0:
            return RootResult(b, fb, it)
        if abs(e) >= xtol and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * xm * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            else:
                p = -p
            if 2.0 * p < min(3.0 * xm * q - abs(xtol * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = xm
        else:
            d = e = xm
        a, fa = b, fb
        if abs(d) > xtol:
            b += d
        else:
            b += math.copysign(xtol, xm)
        fb = float(f(b))
        if math.isnan(fb):
            raise DomainError(f"function is NaN at x={b}")
    raise ConvergenceError(f"root not found in {max_iter} iterations", estimate=b, error=fb)
