"""Explicit bounded-difference concentration constants for geometrically ergodic finite Markov chains."""

__version__ = "0.1.0"

from .bound import BetaResult, beta_constant, iid_tail_bound, markov_tail_bound  # noqa: E402
from .ergodicity import ErgodicityCertificate, fit_ergodicity, slem, tv_decay_profile  # noqa: E402
from .hitting import DriftCertificate, drift_certificate, optimize_drift, sigma_mgf, u_max  # noqa: E402
from .kernel import (  # noqa: E402
    Distribution, MarkovKernel, SmallSet, StateSpace, check_h1, marginal, stationary_distribution,
    tv_distance, validate_kernel,
)

__all__ = [
    "BetaResult", "beta_constant", "iid_tail_bound", "markov_tail_bound",
    "ErgodicityCertificate", "fit_ergodicity", "slem", "tv_decay_profile",
    "DriftCertificate", "drift_certificate", "optimize_drift", "sigma_mgf", "u_max",
    "Distribution", "MarkovKernel", "SmallSet", "StateSpace", "check_h1", "marginal",
    "stationary_distribution", "tv_distance", "validate_kernel",
]
