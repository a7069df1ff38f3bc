"""Independent reference computations used across the test suite.

Nothing here calls the package's own quadrature or root finder: integrals go
through scipy.integrate.quad or mpmath at raised precision.
"""

import math

import mpmath
import numpy as np
from scipy import integrate

from vlc_capacity.input_dist import AvgOnlyInputDist, support_upper


def mp_g(b, s2, A, dps=30):
    """int_1^sqrt(1+s2 A) exp(b (t^2-1)/s2) dt at high precision."""
    with mpmath.workdps(dps):
        b, s2, A = mpmath.mpf(b), mpmath.mpf(s2), mpmath.mpf(A)
        T = mpmath.sqrt(1 + s2 * A)
        c = b / s2
        # split where the integrand changes on the 1/sqrt|c| scale
        pts = [1, T]
        if c != 0:
            w = 1 / mpmath.sqrt(abs(c))
            anchor, sgn = (1, 1) if c < 0 else (T, -1)
            pts += [anchor + sgn * w * f for f in (0.5, 2, 8, 30) if 1 < anchor + sgn * w * f < T]
        pts = sorted(set(pts))
        return float(mpmath.quad(lambda t: mpmath.exp(c * (t * t - 1)), pts))


def dawson_g(b, s2, A):
    """Positive-tilt g through Dawson's integral (closed form)."""
    from scipy.special import dawsn
    c = b / s2
    T = math.sqrt(1.0 + s2 * A)
    rc = math.sqrt(c)
    return (math.exp(c * (T * T - 1.0)) * dawsn(rc * T) - dawsn(rc)) / rc


def mean_from_g(b, s2, A, g):
    """E[X] of the tilted peak-limited density written through g (by parts)."""
    T = math.sqrt(1.0 + s2 * A)
    return (T * math.exp(b * A) - 1.0) / (2.0 * b * g) - 1.0 / (2.0 * b) - 1.0 / s2


def _pieces(dist):
    """Finite breakpoints for quad over the density's support."""
    hi = support_upper(dist)
    scale = abs(1.0 / dist.tilt) if dist.tilt != 0 else hi
    pts = sorted({p for p in (0.01 * scale, 0.1 * scale, scale, 5 * scale, 20 * scale) if 0 < p < hi})
    return [0.0, *pts, hi]


def quad_moment(dist, h):
    """int h(x) f(x) dx over the whole support with scipy quad."""
    f = dist.pdf
    total = 0.0
    edges = _pieces(dist)
    for a, b in zip(edges[:-1], edges[1:]):
        total += integrate.quad(lambda x: h(x) * f(x), a, b, limit=400,
                                epsabs=0, epsrel=1e-13)[0]
    if isinstance(dist, AvgOnlyInputDist):
        total += integrate.quad(lambda x: h(x) * f(x), edges[-1], np.inf, limit=400,
                                epsabs=1e-300, epsrel=1e-12)[0]
    return total


def quad_mass(dist):
    return quad_moment(dist, lambda x: 1.0)


def quad_mean(dist):
    return quad_moment(dist, lambda x: x)


def quad_entropy(dist):
    f = dist.pdf

    def neg_flogf(x):
        v = f(x)
        return -v * math.log(v) if v > 0 else 0.0

    total = 0.0
    edges = _pieces(dist)
    for a, b in zip(edges[:-1], edges[1:]):
        total += integrate.quad(neg_flogf, a, b, limit=400, epsabs=0, epsrel=1e-13)[0]
    if isinstance(dist, AvgOnlyInputDist):
        total += integrate.quad(neg_flogf, edges[-1], np.inf, limit=400)[0]
    return total


def bump(x, c, w):
    """Smooth compactly supported bump (biweight) centred at c, half-width w."""
    z = (np.asarray(x, dtype=float) - c) / w
    return np.where(np.abs(z) < 1, (1 - z * z) ** 2, 0.0)


def perturbation(dist, centres, width):
    """Feasibility-preserving direction eta = f* sum_j a_j bump_j.

    Three bumps give a one-dimensional null space for the two linear
    constraints int eta = 0, int x eta = 0. With non-overlapping bumps and
    coefficients scaled to max |a_j| = 1, f* + eps eta >= 0 for eps < 1.
    Returns (eta, breakpoints).
    """
    f = dist.pdf
    rows = []
    for c in centres:
        lo, hi = max(0.0, c - width), c + width
        m0 = integrate.quad(lambda x: f(x) * bump(x, c, width), lo, hi, epsabs=0, epsrel=1e-13)[0]
        m1 = integrate.quad(lambda x: x * f(x) * bump(x, c, width), lo, hi, epsabs=0,
                            epsrel=1e-13)[0]
        rows.append((m0, m1))
    M = np.array(rows).T  # 2 x 3
    _, _, vt = np.linalg.svd(M)
    a = vt[-1]
    a = a / np.max(np.abs(a))

    def eta(x):
        s = sum(aj * bump(x, c, width) for aj, c in zip(a, centres))
        return f(x) * s

    pts = sorted({max(0.0, c + d) for c in centres for d in (-width, 0.0, width)})
    return eta, pts
