"""Independent checks built on the channel law itself.

The mutual-information oracle never touches the closed-form bounds: it
marginalizes the Gaussian conditional density against the input density on a
fixed node set and integrates ``-f_Y ln f_Y`` adaptively.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import numerics
from .bounds import f_low
from .errors import ConvergenceError, DomainError
from .input_dist import (
    ChannelParams,
    input_entropy,
    mean_log_gain,
    sample,
    support_upper,
)

# Half-width of the output window, in conditional standard deviations.
_WINDOW_SDS = 10.0
# Kernel cutoff used when marginalizing, in conditional standard deviations.
_KERNEL_SDS = 12.0
# Node spacing of the marginalization grid, in conditional standard deviations.
_PANEL_SDS = 0.5
_GL_ORDER = 8
_CHUNK = 64


@dataclass(frozen=True)
class MutualInfoResult:
    h_y: float
    h_y_given_x: float
    mi: float
    quadrature_error: float


# --------------------------------------------------------------------------
# Channel law
# --------------------------------------------------------------------------


def conditional_pdf(y, x, params: ChannelParams):
    """Density of Y given X = x: normal, mean x, variance (1 + varsigma2 x) sigma2."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise DomainError("input intensity must be >= 0")
    var = (1.0 + params.varsigma2 * xa) * params.sigma2
    ya = np.asarray(y, dtype=float)
    out = np.exp(-((ya - xa) ** 2) / (2.0 * var)) / np.sqrt(2.0 * math.pi * var)
    return float(out) if out.ndim == 0 else out


def transmit(x, params: ChannelParams, seed: int, count: int) -> np.ndarray:
    """Simulate ``count`` channel outputs for input ``x``.

    ``x`` may be a scalar or an array of length ``count``. The two noise
    terms come from independent child streams of ``seed``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise DomainError("input intensity must be >= 0")
    s0, s1 = np.random.SeedSequence(seed).spawn(2)
    sigma = math.sqrt(params.sigma2)
    z0 = np.random.default_rng(s0).normal(0.0, sigma, count)
    z1 = np.random.default_rng(s1).normal(0.0, sigma * math.sqrt(params.varsigma2), count)
    return xa + np.sqrt(xa) * z1 + z0


def conditional_entropy(dist) -> float:
    p = dist.params
    return 0.5 * math.log(2.0 * math.pi * math.e * p.sigma2) + 0.5 * mean_log_gain(dist)


# --------------------------------------------------------------------------
# Output marginal
# --------------------------------------------------------------------------


def _to_u(x, sigma, s2):
    """Intensity measured in conditional standard deviations from 0."""
    if s2 == 0:
        return x / sigma
    return 2.0 * (np.sqrt(1.0 + s2 * x) - 1.0) / (s2 * sigma)


def _from_u(u, sigma, s2):
    return sigma * u + 0.25 * s2 * sigma * sigma * u * u


class _Marginal:
    """Output density on a node set spaced by half a conditional deviation."""

    def __init__(self, dist):
        p = dist.params
        self.sigma = math.sqrt(p.sigma2)
        self.s2 = p.varsigma2
        self.x_hi = support_upper(dist)
        u_hi = float(_to_u(self.x_hi, self.sigma, self.s2))
        panels = max(4, int(math.ceil(u_hi / _PANEL_SDS)))
        u, w = numerics.gauss_legendre_nodes(np.linspace(0.0, u_hi, panels + 1), _GL_ORDER)
        x = _from_u(u, self.sigma, self.s2)
        # f_X(x) dx/du = sigma * exp(b x - log_norm): the 1/sqrt factor cancels
        self.mass = self.sigma * np.exp(dist.tilt * x - dist.log_normalizer) * w
        self.x = x
        self.sd = self.sigma * np.sqrt(1.0 + self.s2 * x)
        self.total_mass = float(self.mass.sum())

    def _x_range(self, y_lo, y_hi):
        """Inputs whose kernel reaches [y_lo, y_hi] within the cutoff."""
        k2 = _KERNEL_SDS ** 2 * self.sigma ** 2
        a = k2 * self.s2
        # The lower root falls until y = -k2/a and rises after, so its minimum
        # over the chunk sits at y_lo clamped to that turning point.
        y_min = y_lo
        if a > 0:
            y_min = min(y_hi, max(y_lo, -k2 / a))
        lo = 0.0
        disc = 4.0 * y_min * a + a * a + 4.0 * k2
        if disc > 0:
            lo = max(0.0, 0.5 * (2.0 * y_min + a - math.sqrt(disc)))
        disc = 4.0 * y_hi * a + a * a + 4.0 * k2
        if disc <= 0:
            return None
        hi = 0.5 * (2.0 * y_hi + a + math.sqrt(disc))
        return lo, hi

    def __call__(self, y):
        ya = np.asarray(y, dtype=float).ravel()
        order = np.argsort(ya)
        out = np.zeros_like(ya)
        for start in range(0, ya.size, _CHUNK):
            idx = order[start:start + _CHUNK]
            ys = ya[idx]
            rng = self._x_range(ys[0], ys[-1])
            if rng is None:
                continue
            i0 = np.searchsorted(self.x, rng[0], side="left")
            i1 = np.searchsorted(self.x, rng[1], side="right")
            if i1 <= i0:
                continue
            x, sd, m = self.x[i0:i1], self.sd[i0:i1], self.mass[i0:i1]
            z = (ys[:, None] - x[None, :]) / sd[None, :]
            out[idx] = (np.exp(-0.5 * z * z) / sd[None, :]) @ m / math.sqrt(2.0 * math.pi)
        return out

    def window(self):
        """Output range holding all but a negligible tail of the mass."""
        k = _WINDOW_SDS
        sigma, s2 = self.sigma, self.s2
        # minimize x - k sigma sqrt(1 + s2 x) over [0, x_hi]
        cands = [0.0, self.x_hi]
        if s2 > 0:
            r = 0.5 * k * sigma * s2
            if r > 1:
                cands.append(min(self.x_hi, (r * r - 1.0) / s2))
        lo = min(c - k * sigma * math.sqrt(1.0 + s2 * c) for c in cands)
        hi = self.x_hi + k * sigma * math.sqrt(1.0 + s2 * self.x_hi)
        return lo, hi

    def breakpoints(self, lo, hi, every=4.0):
        """Points spaced ``every`` conditional deviations across [lo, hi]."""
        pts = list(np.arange(lo, min(hi, 0.0), every * self.sigma)[1:])
        u_hi = float(_to_u(hi, self.sigma, self.s2))
        us = np.arange(0.0, u_hi, every)
        pts.extend(_from_u(us, self.sigma, self.s2).tolist())
        return [p for p in pts if lo < p < hi]


@functools.lru_cache(maxsize=32)
def _marginal(dist) -> _Marginal:
    return _Marginal(dist)


def output_marginal_pdf(y, dist):
    """f_Y(y) = int f_{Y|X}(y|x) f_X(x) dx."""
    out = _marginal(dist)(y)
    return float(out[0]) if np.ndim(y) == 0 else out.reshape(np.shape(y))


def output_entropy(dist, rel_tol: float = 1e-10) -> tuple[float, float]:
    """H(Y) in nats and its quadrature error estimate."""
    marg = _marginal(dist)
    lo, hi = marg.window()

    def integrand(y):
        f = marg(y)
        return np.where(f > 0, -f * np.log(np.where(f > 0, f, 1.0)), 0.0)

    res = numerics.integrate(integrand, lo, hi, rel_tol=rel_tol, abs_tol=1e-12,
                             points=marg.breakpoints(lo, hi))
    # Missing input mass (truncated tails) shows up as an entropy error of order
    # |1 - mass| * |ln f|; fold a generous version into the estimate.
    mass_err = abs(1.0 - marg.total_mass) * 50.0
    return res.value, res.est_error + mass_err


def mutual_information(dist) -> MutualInfoResult:
    """I(X;Y) = H(Y) - H(Y|X) by quadrature.

    Raises:
        ConvergenceError: the output-entropy integral did not converge.
    """
    try:
        h_y, err = output_entropy(dist)
    except ConvergenceError as exc:
        raise ConvergenceError(f"output entropy did not converge: {exc}",
                               estimate=exc.estimate, error=exc.error) from exc
    h_yx = conditional_entropy(dist)
    return MutualInfoResult(h_y, h_yx, h_y - h_yx, err)


def entropy_inequality_check(dist, slack: float = 1e-4) -> tuple[float, float, bool]:
    """Compare H(Y) against H(X) + f_low(xiP)."""
    lhs, _ = output_entropy(dist)
    rhs = input_entropy(dist) + f_low(dist.target_mean, dist.params)
    return lhs, rhs, lhs >= rhs - slack


def monte_carlo_mutual_information(dist, seed: int, count: int) -> tuple[float, float]:
    """Sample estimate of E[ln f(Y|X) - ln f_Y(Y)] and its standard error."""
    ss = np.random.SeedSequence(seed)
    s_in, s_ch = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
    x = sample(dist, s_in, count)
    y = transmit(x, dist.params, s_ch, count)
    ll = np.log(conditional_pdf(y, x, dist.params)) - np.log(_marginal(dist)(y))
    return float(ll.mean()), float(ll.std(ddof=1) / math.sqrt(count))


# --------------------------------------------------------------------------
# Receiver noise budget
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseInputs:
    """Physical receiver quantities (SI units)."""

    q: float = 1.602176634e-19
    eta: float = 0.8
    h_nu: float = 3.61e-19
    B: float = 1e7
    X: float = 1e-3
    X_b: float = 1e-4
    i_dark: float = 1e-9
    K: float = 1.380649e-23
    T: float = 300.0
    R_e: float = 1e3
    r_e: float = 1e3

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be finite and >= 0, got {v}")
        if not self.h_nu > 0:
            raise DomainError("photon energy must be > 0")


@dataclass(frozen=True)
class NoiseBudget:
    i_s: float
    i_b: float
    i_d_rms: float
    i_th: float
    i_a: float
    inputs: NoiseInputs


def shot_noise(inputs: NoiseInputs) -> tuple[float, float, float]:
    """RMS shot-noise currents from signal, background and dark current."""
    k = 2.0 * inputs.q ** 2 * inputs.eta / inputs.h_nu
    return (
        math.sqrt(k * inputs.X * inputs.B),
        math.sqrt(k * inputs.X_b * inputs.B),
        math.sqrt(2.0 * inputs.q * inputs.i_dark * inputs.B),
    )


def _check_resistive(K, T, B, R):
    if not R > 0:
        raise DomainError(f"resistance must be > 0, got {R}")
    if not (T > 0 and B > 0 and K > 0):
        raise DomainError("K, T and B must be > 0")


def thermal_noise(K: float, T: float, B: float, R_e: float) -> float:
    _check_resistive(K, T, B, R_e)
    return math.sqrt(4.0 * K * T * B / R_e)


def amplifier_noise(K: float, T: float, B: float, r_e: float) -> float:
    _check_resistive(K, T, B, r_e)
    return math.sqrt(2.0 * K * T * B / r_e)


def noise_budget(inputs: NoiseInputs) -> NoiseBudget:
    i_s, i_b, i_d = shot_noise(inputs)
    return NoiseBudget(
        i_s, i_b, i_d,
        thermal_noise(inputs.K, inputs.T, inputs.B, inputs.R_e),
        amplifier_noise(inputs.K, inputs.T, inputs.B, inputs.r_e),
        inputs,
    )


def variance_split(budget: NoiseBudget, scale: float = 1.0,
                   intensity_unit: float = 1.0) -> tuple[float, float]:
    """Map the current budget onto ``(varsigma2, sigma2)``.

    ``sigma2 = scale * (i_b^2 + i_d^2 + i_th^2 + i_a^2)`` and the
    signal-dependent variance per unit of normalized intensity is
    ``scale * intensity_unit * i_s^2 / X``, so ``varsigma2`` does not depend
    on ``scale``. ``intensity_unit`` is the optical power (W) of one
    normalized intensity unit.

    Raises:
        DomainError: the signal-independent part is zero.
    """
    if not (scale > 0 and intensity_unit > 0):
        raise DomainError("scale and intensity_unit must be > 0")
    indep = budget.i_b ** 2 + budget.i_d_rms ** 2 + budget.i_th ** 2 + budget.i_a ** 2
    if indep == 0:
        raise DomainError("signal-independent variance is zero; varsigma2 undefined")
    inp = budget.inputs
    # No signal current means no measured signal-dependent part.
    per_watt = budget.i_s ** 2 / inp.X if inp.X > 0 else 0.0
    return per_watt * intensity_unit / indep, scale * indep
