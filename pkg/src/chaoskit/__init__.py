"""Discrete Wiener chaos, Clark-Ocone expansions and martingale-representation errors."""

from .clark_ocone import (
    ErrorEstimate,
    OneDimCoeffs,
    error_norm_1d,
    error_norm_from_spectrum,
    integrand,
    partial_sum_eval,
)
from .functionals import build_additive, coeffs_1d, heaviside_coeffs, occupation, terminal_spectrum
from .hermite import QuadratureRule, gauss_hermite_rule, hermite_eval
from .payoffs import parse_payoff
from .space import (
    ChaosSpectrum,
    FunctionalSpec,
    TimeGrid,
    conditional_expectation,
    derivative,
    evaluate,
    project_chaos,
    sobolev_norm,
)

__version__ = "0.1.0"
