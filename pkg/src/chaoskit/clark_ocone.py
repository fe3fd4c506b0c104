"""
Discrete Clark-Ocone expansion and martingale-representation errors.

For a functional X on the grid,

    X = E[X] + sum_{m>=1} sum_l (dt^{m/2}/sqrt(m!)) E[d_l^m X | G_{l-1}] H_m(dW_l/sqrt(dt)),

and Err_N(n) is what remains after the levels m = 1..n.  On the chaos
spectrum the level-m, position-l term collects exactly the indices whose
last nonzero entry sits at l and equals m, so ||Err_N(n)||^2 is a sum of
squared coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .hermite import hermite_table
from .space import ChaosSpectrum, evaluate

__all__ = [
    "OneDimCoeffs",
    "ErrorEstimate",
    "integrand",
    "partial_sum_eval",
    "error_norm_from_spectrum",
    "mart_weight",
    "tail_discount",
    "error_norm_1d",
]


@dataclass(frozen=True)
class OneDimCoeffs:
    """
    One-dimensional chaos profile a_n = E[F(W_T) H_n(W_T/sqrt(T))].

    Attributes
    ----------
    T : float
    a : numpy.ndarray
        Coefficients a_0..a_{n_max}.
    tail_mass : float or None
        Known value (``tail_exact``) or upper bound of sum_{n>n_max} a_n^2;
        ``None`` when nothing is known about the tail.
    tail_exact : bool
    """

    T: float
    a: np.ndarray
    tail_mass: float | None = None
    tail_exact: bool = False

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.ndim != 1 or a.size == 0:
            raise ValueError("a must be a non-empty vector")
        a.flags.writeable = False
        object.__setattr__(self, "a", a)

    @property
    def n_max(self) -> int:
        return self.a.size - 1

    def truncate(self, n_max: int) -> "OneDimCoeffs":
        """Keep a_0..a_{n_max}; the dropped mass is folded into the tail."""
        if n_max >= self.n_max:
            return self
        dropped = math.fsum(self.a[n_max + 1:] ** 2)
        tail = None if self.tail_mass is None else self.tail_mass + dropped
        return OneDimCoeffs(self.T, self.a[: n_max + 1], tail, self.tail_exact)


@dataclass(frozen=True)
class ErrorEstimate:
    """
    Squared error norm with a certified truncation bracket.

    The true value lies in ``[value - tail_bound, value + tail_bound]``
    (``partial`` is the plain truncated sum).  ``truncated`` marks results
    whose tail could not be certified.
    """

    value: float
    tail_bound: float
    partial: float
    truncated: bool = False

    def __float__(self) -> float:
        return self.value


# ----------------------------------------------------------- spectrum side

def _check_spectrum_level(x: ChaosSpectrum, l: int):
    if int(l) != l or not 1 <= l <= x.N:
        raise ValueError(f"l={l} outside [1, {x.N}]")


def integrand(x: ChaosSpectrum, l: int, m: int) -> ChaosSpectrum:
    """
    Spectrum of E[d_l^m X | G_{l-1}].

    The coefficient at (k_1..k_{l-1}, 0, ...) is
    sqrt(m!) dt^{-m/2} c(k_1..k_{l-1}, m, 0, ...).
    """
    _check_spectrum_level(x, l)
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    idx = x.indices
    sel = (idx[:, l - 1] == m) & ~np.any(idx[:, l:] > 0, axis=1)
    out = idx[sel].copy()
    out[:, l - 1] = 0
    scale = math.sqrt(math.factorial(m)) * x.grid.dt ** (-0.5 * m)
    return ChaosSpectrum.from_arrays(x.grid, out, scale * x.values[sel], max(x.n_max - m, 0))


def partial_sum_eval(x: ChaosSpectrum, n: int, point):
    """
    Evaluate E[X] + sum_{m=1}^n sum_l (dt^{m/2}/sqrt(m!)) E[d_l^m X|G_{l-1}] H_m(point_l/sqrt(dt)).

    ``point`` is a length-N vector or an ``(M, N)`` array.
    """
    if int(n) != n or not 0 <= n <= x.n_max:
        raise ValueError(f"n={n} outside [0, n_max={x.n_max}]")
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != x.N:
        raise ValueError(f"point has {pts.shape[1]} coordinates, spectrum has N={x.N}")
    dt = x.grid.dt
    h = hermite_table(max(n, 1), pts / math.sqrt(dt))             # (n+1, M, N)
    total = np.full(pts.shape[0], x.mean)
    for m in range(1, n + 1):
        w = dt ** (0.5 * m) / math.sqrt(math.factorial(m))
        for l in range(1, x.N + 1):
            g = integrand(x, l, m)
            if len(g):
                total += w * evaluate(g, pts) * h[m, :, l - 1]
    return float(total[0]) if single else total


def error_norm_from_spectrum(x: ChaosSpectrum, n: int) -> float:
    """
    ||Err_N(n)||^2: squared mass on nonzero indices whose last nonzero entry exceeds n.
    """
    if int(n) != n or n < 0:
        raise ValueError(f"n must be a non-negative integer, got {n}")
    if len(x) == 0:
        return 0.0
    tr = x.trailing
    last = np.where(tr > 0, x.indices[np.arange(len(x)), np.maximum(tr - 1, 0)], 0)
    return math.fsum(x.values[last >= n + 1] ** 2)


# ------------------------------------------------------------ 1-D closed form

def mart_weight(n, N: int) -> np.ndarray:
    """
    n * I_{n,N} = 1 - (n/N) sum_{l=0}^{N-1} (l/N)^{n-1} for every n in ``n``.

    Evaluated without cancellation as the telescoped sum
    sum_{l=0}^{N-1} ((l+1)/N)^n P(Bin(n, 1/(l+1)) >= 2); terms negligible
    against the largest one (relative 1e-17) are skipped.  For n <= 1 the
    weight is 0.
    """
    n_arr = np.atleast_1d(np.asarray(n, dtype=np.int64))
    out = np.zeros(n_arr.shape, dtype=float)
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    for pos, nn in enumerate(n_arr):
        if nn < 2:
            continue
        out[pos] = _mart_weight_one(int(nn), N)
    return out if np.ndim(n) else float(out[0])


def _mart_weight_one(n: int, N: int) -> float:
    # largest term is l = N-1: P(Bin(n, 1/N) >= 2); skip l with ((l+1)/N)^n
    # below 1e-17 of it, i.e. (l+1) < N * (1e-17 * top)^(1/n)
    top = float(betainc(2.0, n - 1.0, 1.0 / N))
    cut = N * math.exp(math.log(1e-17 * max(top, 1e-300)) / n)
    l0 = max(int(math.floor(cut)) - 1, 0)
    lp1 = np.arange(l0 + 1, N + 1, dtype=float)
    terms = np.exp(n * np.log(lp1 / N)) * betainc(2.0, n - 1.0, 1.0 / lp1)
    return float(np.sum(terms[::-1]))


def tail_discount(n: int, N: int) -> float:
    """
    g(n) with n I_{n,N} >= 1 - g(n) for all degrees >= n.

    Since (l/N)^{n-1} <= exp(-(n-1)(N-l)/N), the power sum is at most a
    geometric series, giving g(n) = (n/N) / (exp((n-1)/N) - 1), which is
    decreasing in n for n >= 2.  Capped at 1.
    """
    if n < 2:
        return 1.0
    x = (n - 1) / N
    # written with exp(-x) so that large x underflows to 0 instead of overflowing
    return min(1.0, (n / N) * math.exp(-x) / -math.expm1(-x))


def error_norm_1d(a: OneDimCoeffs, N: int) -> ErrorEstimate:
    """
    ||1-Mart.Err(F(W_T))||^2 = sum_{n>=2} n I_{n,N} a_n^2 for a terminal payoff.

    With a known tail mass R = sum_{n>n_max} a_n^2 the unseen part lies in
    [R (1 - g(n_max+1)), R]; the midpoint is added to the value and the
    half-width reported as ``tail_bound``.  With only an upper bound on R
    the bracket is [0, R].  Without tail information the result is marked
    truncated.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    n = np.arange(a.n_max + 1)
    weights = mart_weight(n, N) if a.n_max >= 2 else np.zeros(n.size)
    partial = math.fsum(weights * a.a**2)
    if a.tail_mass is None:
        return ErrorEstimate(partial, math.inf, partial, True)
    R = max(a.tail_mass, 0.0)
    lo = R * (1.0 - tail_discount(a.n_max + 1, N)) if a.tail_exact else 0.0
    return ErrorEstimate(partial + 0.5 * (lo + R), 0.5 * (R - lo), partial, False)
