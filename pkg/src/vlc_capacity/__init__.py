"""Capacity bounds for visible light communication under signal-dependent
Gaussian noise, with quadrature and Monte-Carlo oracles."""

from .bounds import (
    BoundReport,
    Scenario,
    UpperBoundParams,
    report_avg_only,
    report_peak_avg,
    shannon_awgn,
)
from .channel import mutual_information, transmit
from .errors import BracketError, ConvergenceError, DomainError, FeasibilityError, SolverError
from .input_dist import (
    AvgOnlyConstraints,
    AvgOnlyInputDist,
    Branch,
    ChannelParams,
    PeakAvgConstraints,
    PeakAvgInputDist,
    alpha_star,
    sample,
    solve_b,
    solve_mn,
)

__version__ = "0.1.0"

__all__ = [
    "AvgOnlyConstraints", "AvgOnlyInputDist", "BoundReport", "Branch", "BracketError",
    "ChannelParams", "ConvergenceError", "DomainError", "FeasibilityError",
    "PeakAvgConstraints", "PeakAvgInputDist", "Scenario", "SolverError", "UpperBoundParams",
    "alpha_star", "mutual_information", "report_avg_only", "report_peak_avg", "sample",
    "shannon_awgn", "solve_b", "solve_mn", "transmit",
]
