"""
Recurrence and transience of normally reflected Brownian motion in
unbounded domains ``{(x, z) in R^l x R^m : |z| < H(|x|)}``.

Submodules
----------
profile      boundary profiles ``H`` and their regularity checks
classify     integral tests, scale function of the radial comparison diffusion
lyapunov     level-set Lyapunov functions and their verification
simulate     reflected random-walk schemes for the full and reduced processes
experiments  Monte Carlo studies against closed-form oracles
capacity     finite-difference Dirichlet energies of growing annuli
verify       invariant suite for one domain
cli          the ``horncrit`` command
"""
__version__ = "0.1.0"

from .classify import (DomainSpec, classify_positive_recurrence, classify_transience,
                       hitting_prob_1d, scale_function)
from .profile import check_assumption_H, make_profile, parse_profile

__all__ = [
    "DomainSpec",
    "make_profile",
    "parse_profile",
    "check_assumption_H",
    "classify_transience",
    "classify_positive_recurrence",
    "scale_function",
    "hitting_prob_1d",
]
