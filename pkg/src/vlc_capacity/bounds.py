"""Closed-form capacity bounds, gaps and asymptotic gaps (all in nats)."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from . import numerics
from .errors import DomainError
from .input_dist import (
    AvgOnlyInputDist,
    Branch,
    ChannelParams,
    PeakAvgConstraints,
    PeakAvgInputDist,
    _log_weight_integral,
    g_factor,
)

VALIDITY_NOTE = "upper bound is asymptotic; trusted for intensity >= 30 dB"


class Scenario(enum.Enum):
    PEAK_AVG = "PeakAvg"
    AVG_ONLY = "AvgOnly"


@dataclass(frozen=True)
class UpperBoundParams:
    """Constants of the auxiliary output densities.

    ``beta`` and ``delta`` are small positive numbers; zero is accepted for
    limit checks.
    """

    beta: float = 1e-3
    delta: float = 1e-3

    def __post_init__(self):
        if not 0 <= self.beta < 0.5:
            raise DomainError(f"beta must lie in [0, 0.5), got {self.beta}")
        if not (math.isfinite(self.delta) and self.delta >= 0):
            raise DomainError(f"delta must be >= 0, got {self.delta}")


@dataclass(frozen=True)
class BoundReport:
    scenario: Scenario
    c_low: float
    c_upp: float
    gap: float
    asymptotic_gap: float
    aux: dict = field(default_factory=dict)
    asymptotic: bool = True
    validity: str = VALIDITY_NOTE

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario.value,
            "c_low": self.c_low,
            "c_upp": self.c_upp,
            "gap": self.gap,
            "asymptotic_gap": self.asymptotic_gap,
            "asymptotic": self.asymptotic,
            "validity": self.validity,
            "aux": dict(self.aux),
        }


def _half_log_2pie(sigma2):
    return 0.5 * math.log(2.0 * math.pi * math.e * sigma2)


def f_low(xiP: float, params: ChannelParams) -> float:
    """Entropy gain of the output over the input, positive for varsigma2 > 0.

    Evaluated as ``log1p(2u)/2 - u / (sqrt(1+2u) + 1 + u)`` with
    ``u = varsigma2 sigma2 / xiP``, which equals the textbook three-term form
    without its cancellation at large ``xiP``. Returns 0 at ``varsigma2 = 0``.
    """
    if not (math.isfinite(xiP) and xiP > 0):
        raise DomainError(f"xiP must be > 0, got {xiP}")
    u = params.varsigma2 * params.sigma2 / xiP
    return 0.5 * math.log1p(2.0 * u) - u / (math.sqrt(1.0 + 2.0 * u) + 1.0 + u)


# --------------------------------------------------------------------------
# Peak + average
# --------------------------------------------------------------------------


def c_low_peak_avg(dist: PeakAvgInputDist) -> float:
    p = dist.params
    xiP = dist.constraints.mean
    return dist.log_normalizer - dist.b * xiP - _half_log_2pie(p.sigma2) + f_low(xiP, p)


def _log_upper_normalizer(b, varsigma2, A, delta):
    """log(2 G / varsigma2), finite also in the varsigma2 -> 0 limit."""
    upper = A * (1.0 + delta)
    if b == 0:
        if varsigma2 == 0:
            return math.log(upper)
        return math.log(2.0 * upper / (math.sqrt(1.0 + varsigma2 * upper) + 1.0))
    return _log_weight_integral(b, varsigma2, upper)[0]


def big_g(b: float, varsigma2: float, A: float, delta: float) -> float:
    """integral_1^sqrt(1 + varsigma2 A (1+delta)) exp(b (t^2-1)/varsigma2) dt, by quadrature."""
    if not varsigma2 > 0 or not A > 0 or delta < 0:
        raise DomainError("big_g needs varsigma2 > 0, A > 0, delta >= 0")
    return 0.5 * varsigma2 * math.exp(_log_upper_normalizer(b, varsigma2, A, delta))


def psi(b: float, params: ChannelParams, cons: PeakAvgConstraints, delta: float) -> float:
    """Correction term of the tilted upper bound; undefined at ``b = 0``."""
    if b == 0:
        raise DomainError("psi is only defined for b != 0")
    s2, sig2 = params.varsigma2, params.sigma2
    A, xiP = cons.A, cons.mean
    var_a = (1.0 + A * s2) * sig2
    lead = math.sqrt(var_a) / math.sqrt(2.0 * math.pi)
    if b < 0:
        return -b * lead * math.exp(-A * A / (2.0 * var_a)) - b * xiP
    sd = math.sqrt((1.0 + xiP * s2) * sig2)
    window = numerics.gauss_q(-xiP / sd) - numerics.gauss_q((A + A * delta - xiP) / sd)
    return b * lead * math.exp(-((A * delta) ** 2) / (2.0 * var_a)) - b * xiP * window


def c_upp_peak_avg(dist: PeakAvgInputDist, ub: UpperBoundParams) -> float:
    """Asymptotic upper bound with the vanishing residual set to zero."""
    p, c = dist.params, dist.constraints
    base = (_log_upper_normalizer(dist.b, p.varsigma2, c.A, ub.delta)
            - math.log1p(-2.0 * ub.beta) - _half_log_2pie(p.sigma2))
    if dist.branch is Branch.ZERO_B:
        return base
    return base + psi(dist.b, p, c, ub.delta)


def gap_closed_form_peak_avg(dist: PeakAvgInputDist, ub: UpperBoundParams) -> float:
    """Upper minus lower bound written as a single expression."""
    p, c = dist.params, dist.constraints
    fl = f_low(c.mean, p)
    log_ratio = (_log_upper_normalizer(dist.b, p.varsigma2, c.A, ub.delta)
                 - dist.log_normalizer - math.log1p(-2.0 * ub.beta))
    if dist.branch is Branch.ZERO_B:
        return log_ratio - fl
    return log_ratio + psi(dist.b, p, c, ub.delta) + dist.b * c.mean - fl


def gap_peak_avg(dist: PeakAvgInputDist, ub: UpperBoundParams) -> float:
    return c_upp_peak_avg(dist, ub) - c_low_peak_avg(dist)


def asymptotic_gap_peak_avg(branch: Branch, ub: UpperBoundParams) -> float:
    if branch is Branch.ZERO_B:
        return 0.5 * math.log1p(ub.delta) - math.log1p(-2.0 * ub.beta)
    return -math.log1p(-2.0 * ub.beta)


def report_peak_avg(dist: PeakAvgInputDist, ub: UpperBoundParams | None = None) -> BoundReport:
    ub = ub or UpperBoundParams()
    p, c = dist.params, dist.constraints
    lo = c_low_peak_avg(dist)
    up = c_upp_peak_avg(dist, ub)
    aux = {
        "f_low": f_low(c.mean, p),
        "b": dist.b,
        "branch": dist.branch.value,
        "log_normalizer": dist.log_normalizer,
        "log_upper_normalizer": _log_upper_normalizer(dist.b, p.varsigma2, c.A, ub.delta),
        "gap_closed_form": gap_closed_form_peak_avg(dist, ub),
    }
    if p.varsigma2 > 0:
        aux["g"] = 0.5 * p.varsigma2 * dist.normalizer
        aux["G"] = 0.5 * p.varsigma2 * math.exp(aux["log_upper_normalizer"])
    if dist.branch is Branch.NONZERO_B:
        aux["psi"] = psi(dist.b, p, c, ub.delta)
    return BoundReport(Scenario.PEAK_AVG, lo, up, up - lo,
                       asymptotic_gap_peak_avg(dist.branch, ub), aux)


# --------------------------------------------------------------------------
# Average only
# --------------------------------------------------------------------------


def c_low_avg_only(dist: AvgOnlyInputDist) -> float:
    p = dist.params
    xiP = dist.constraints.mean
    return -_half_log_2pie(p.sigma2) + 1.0 + dist.m + dist.n * xiP + f_low(xiP, p)


def c_upp_avg_only(dist: AvgOnlyInputDist, beta: float) -> float:
    if not 0 <= beta < 1:
        raise DomainError(f"beta must lie in [0, 1), got {beta}")
    p = dist.params
    xiP = dist.constraints.mean
    return -_half_log_2pie(p.sigma2) + 1.0 + dist.m + dist.n * xiP - math.log1p(-beta)


def asymptotic_gap_avg_only(beta: float) -> float:
    return -math.log1p(-beta)


def gap_closed_form_avg_only(dist: AvgOnlyInputDist, beta: float) -> float:
    return asymptotic_gap_avg_only(beta) - f_low(dist.constraints.mean, dist.params)


def gap_avg_only(dist: AvgOnlyInputDist, beta: float) -> float:
    return c_upp_avg_only(dist, beta) - c_low_avg_only(dist)


def report_avg_only(dist: AvgOnlyInputDist, beta: float = 1e-3) -> BoundReport:
    lo = c_low_avg_only(dist)
    up = c_upp_avg_only(dist, beta)
    aux = {
        "f_low": f_low(dist.constraints.mean, dist.params),
        "m": dist.m,
        "n": dist.n,
        "gap_closed_form": gap_closed_form_avg_only(dist, beta),
    }
    return BoundReport(Scenario.AVG_ONLY, lo, up, up - lo, asymptotic_gap_avg_only(beta), aux)


def shannon_awgn(snr: float) -> float:
    """Capacity of the real AWGN channel, 0.5 ln(1 + snr)."""
    if not snr >= 0:
        raise DomainError(f"snr must be >= 0, got {snr}")
    return 0.5 * math.log1p(snr)


__all__ = [
    "Scenario", "UpperBoundParams", "BoundReport", "f_low", "g_factor", "big_g", "psi",
    "c_low_peak_avg", "c_upp_peak_avg", "gap_peak_avg", "gap_closed_form_peak_avg",
    "asymptotic_gap_peak_avg", "report_peak_avg", "c_low_avg_only", "c_upp_avg_only",
    "gap_avg_only", "gap_closed_form_avg_only", "asymptotic_gap_avg_only", "report_avg_only",
    "shannon_awgn",
]
