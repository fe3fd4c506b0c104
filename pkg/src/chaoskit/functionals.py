"""
Closed-form chaos profiles for terminal payoffs and additive functionals.

A terminal payoff F(W_T) depends on the increments only through their sum,
so its spectrum is the 1-D profile a_n spread over multi-indices:

    c_k = sqrt(n! / (k_1! ... k_N!)) * N^{-n/2} * a_n,    n = |k|.

An additive functional sum_i f(t_i, W_{t_i}) dt is a sum of such terms, the
i-th one living on coordinates 1..i.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .clark_ocone import OneDimCoeffs
from .hermite import hermite_zero
from .payoffs import CallablePayoff, Heaviside, Payoff, Power, Sine
from .space import ChaosSpectrum, FunctionalSpec, InfeasibleError, TimeGrid, enumerate_indices

__all__ = [
    "NotSquareIntegrable",
    "INDEX_BUDGET",
    "heaviside_coeffs",
    "coeffs_1d",
    "terminal_spectrum",
    "build_additive",
    "occupation",
]

#: largest number of multi-indices a closed-form constructor will enumerate
INDEX_BUDGET = 5 * 10**6

_DRIFT_TOL = 1e-6


class NotSquareIntegrable(ValueError):
    """Raised when quadrature moments of a payoff do not settle."""


def heaviside_coeffs(n_max: int, T: float = 1.0) -> OneDimCoeffs:
    """
    Profile of 1_{[0, inf)}(W_T): a_0 = 1/2, a_k = H_{k-1}(0) / sqrt(2 pi k).

    The profile does not depend on T.  The tail mass 1/2 - sum a_k^2 is exact.
    """
    if n_max < 0:
        raise ValueError(f"n_max must be non-negative, got {n_max}")
    a = np.empty(n_max + 1)
    a[0] = 0.5
    if n_max >= 1:
        k = np.arange(1, n_max + 1, dtype=float)
        a[1:] = hermite_zero(n_max - 1) / np.sqrt(2.0 * math.pi * k)
    return OneDimCoeffs(T, a, max(0.5 - math.fsum(a**2), 0.0), True)


def _as_payoff(payoff) -> Payoff:
    if isinstance(payoff, FunctionalSpec):
        if payoff.kind != "terminal":
            raise ValueError(f"expected a terminal payoff, got kind {payoff.kind!r}")
        return payoff.payoff
    if isinstance(payoff, Payoff):
        return payoff
    if callable(payoff):
        return CallablePayoff(payoff)
    raise TypeError(f"cannot interpret {payoff!r} as a payoff")


def coeffs_1d(payoff, T: float, n_max: int, quad_order: int = 64) -> OneDimCoeffs:
    """
    a_n = E[F(W_T) H_n(W_T/sqrt(T))] for n = 0..n_max.

    Catalog payoffs use closed forms (``quad_order`` ignored) and carry an
    exact tail mass from their known second moment.  Other payoffs use
    Gauss-Hermite quadrature at ``quad_order`` and ``quad_order + 8``.

    Raises
    ------
    NotSquareIntegrable
        If the two quadrature orders disagree by more than 1e-6 relative.
    """
    if n_max < 0:
        raise ValueError(f"n_max must be non-negative, got {n_max}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    F = _as_payoff(payoff)
    if isinstance(F, Heaviside):
        return heaviside_coeffs(n_max, T)
    if isinstance(F, CallablePayoff) or type(F).smoothed is Payoff.smoothed:
        a = F.smoothed(0.0, T, n_max, quad_order)
        b = F.smoothed(0.0, T, n_max, quad_order + 8)
        scale = max(float(np.max(np.abs(b))), 1e-300)
        drift = float(np.max(np.abs(a - b))) / scale
        if not np.all(np.isfinite(a)) or drift > _DRIFT_TOL:
            raise NotSquareIntegrable(
                f"quadrature moments of {F.name} drift by {drift:.3g} between orders "
                f"{quad_order} and {quad_order + 8}"
            )
        return OneDimCoeffs(T, b)
    a = F.smoothed(0.0, T, n_max)
    if isinstance(F, Power) and n_max >= F.p:
        return OneDimCoeffs(T, a, 0.0, True)
    if isinstance(F, Sine):
        # a_n^2 <= e^{-T} T^n / n!, summed as a geometric majorant
        if n_max + 2 > T:
            log_first = -T + (n_max + 1) * math.log(T) - math.lgamma(n_max + 2)
            bound = math.exp(log_first) / (1.0 - T / (n_max + 2))
            return OneDimCoeffs(T, a, bound, False)
    m2 = F.second_moment(T)
    if m2 is None:
        return OneDimCoeffs(T, a)
    return OneDimCoeffs(T, a, max(m2 - math.fsum(a**2), 0.0), True)


def _log_multinomial_sqrt(indices: np.ndarray) -> np.ndarray:
    n = indices.sum(axis=1)
    return 0.5 * (gammaln(n + 1.0) - gammaln(indices + 1.0).sum(axis=1))


def _guarded_indices(N: int, n_max: int) -> np.ndarray:
    count = math.comb(N + n_max, N)
    if count > INDEX_BUDGET:
        raise InfeasibleError(
            f"{count:.3g} multi-indices of degree <= {n_max} over N={N} exceed the budget "
            f"{INDEX_BUDGET:.0e}; lower n_max or N, or use the 1-D error formulas"
        )
    return enumerate_indices(N, n_max)


def terminal_spectrum(a: OneDimCoeffs, grid: TimeGrid, n_max: int | None = None) -> ChaosSpectrum:
    """Full spectrum of F(W_T) on ``grid`` by multinomial spreading of ``a``."""
    n_max = a.n_max if n_max is None else min(n_max, a.n_max)
    idx = _guarded_indices(grid.N, n_max)
    n = idx.sum(axis=1)
    vals = np.exp(_log_multinomial_sqrt(idx) - 0.5 * n * math.log(grid.N)) * a.a[n]
    return ChaosSpectrum.from_arrays(grid, idx, vals, n_max)


def build_additive(f, grid: TimeGrid, n_max: int, quad_order: int = 64,
                   chop: float = 1e-14) -> ChaosSpectrum:
    """
    Spectrum of sum_{i=1}^N f(t_i, W_{t_i}) dt.

    With b_{i,n} the 1-D profile of f(t_i, .) against N(0, t_i), an index k
    of degree n and last nonzero position l receives
    dt * sqrt(n!/k!) * sum_{i >= max(l, 1)} i^{-n/2} b_{i,n}.
    Coefficients below ``chop * ||X||`` are treated as quadrature noise,
    as in ``project_chaos``.
    """
    spec = f if isinstance(f, FunctionalSpec) else FunctionalSpec.additive(f)
    if spec.kind != "additive":
        raise ValueError(f"expected an additive functional, got kind {spec.kind!r}")
    if n_max < 0:
        raise ValueError(f"n_max must be non-negative, got {n_max}")
    N = grid.N
    idx = _guarded_indices(N, n_max)
    b = np.empty((N + 1, n_max + 1))
    b[0] = 0.0
    for i in range(1, N + 1):
        prof = spec.profile_at(grid.t(i))
        if isinstance(prof, Heaviside):
            b[i] = heaviside_coeffs(n_max).a
        else:
            b[i] = prof.smoothed(0.0, grid.t(i), n_max, quad_order)
    i = np.arange(1, N + 1, dtype=float)[:, None]
    w = np.exp(-0.5 * np.arange(n_max + 1) * np.log(i)) * b[1:]   # i^{-n/2} b_{i,n}
    suffix = np.zeros((N + 2, n_max + 1))
    suffix[1:N + 1] = np.cumsum(w[::-1], axis=0)[::-1]
    suffix[0] = suffix[1]
    n = idx.sum(axis=1)
    tr = np.where(n > 0, N - np.argmax((idx > 0)[:, ::-1], axis=1), 0)
    vals = grid.dt * np.exp(_log_multinomial_sqrt(idx)) * suffix[tr, n]
    if chop > 0 and vals.size:
        norm = math.sqrt(math.fsum(vals**2))
        vals = np.where(np.abs(vals) <= chop * norm, 0.0, vals)
    return ChaosSpectrum.from_arrays(grid, idx, vals, n_max)


def occupation() -> FunctionalSpec:
    """The occupation-time sum sum_i 1_{[0, inf)}(W_{t_i}) dt."""
    return FunctionalSpec.additive(Heaviside())
