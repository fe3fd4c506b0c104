"""
Rate experiments: Z_{N,k}, the occupation-time error, the index alpha_{N,n}
and log-log slope fits.

Several quantities share the bracket

    t_l^k - t_{l-1}^k - k dt t_{l-1}^{k-1} = t_l^k P(Bin(k, 1/l) >= 2),

which is evaluated through the regularized incomplete beta function to
avoid the cancellation of the raw difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import betainc, gammaln

from .clark_ocone import ErrorEstimate, error_norm_1d
from .functionals import heaviside_coeffs
from .hermite import hermite_zero
from .space import ChaosSpectrum

__all__ = [
    "ErrorReport",
    "z_nk",
    "z_table",
    "z_bound",
    "heaviside_tail_bound",
    "occupation_error_norm",
    "alpha_index",
    "occupation_A",
    "occupation_alpha",
    "fdp_index",
    "rate_fit",
    "error_rate",
    "occupation_rate",
    "default_n_max",
]


# ------------------------------------------------------------------ Z_{N,k}

def _excess(k, x):
    # P(Bin(k, x) >= 2) for k >= 2
    return betainc(2.0, np.asarray(k, dtype=float) - 1.0, x)


def _suffix_ratios(N: int, k: np.ndarray) -> np.ndarray:
    """s_l = sum_{i=l}^N (l/i)^{k/2}, l = 1..N, shape (N, len(k))."""
    s = np.empty((N, k.size))
    s[N - 1] = 1.0
    for l in range(N - 1, 0, -1):
        s[l - 1] = 1.0 + (l / (l + 1.0)) ** (0.5 * k) * s[l]
    return s


def z_nk(N: int, k, T: float = 1.0):
    """
    Z_{N,k} = sum_l (sum_{i>=l} dt / t_i^{k/2})^2 (t_l^k - t_{l-1}^k - k dt t_{l-1}^{k-1}).

    Written as dt^2 sum_l s_l^2 P(Bin(k, 1/l) >= 2) with s_l the suffix sums
    of (l/i)^{k/2}; every term is non-negative.  ``k`` may be an array.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    k_arr = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any(k_arr < 2) or np.any(k_arr != np.round(k_arr)):
        raise ValueError("k must be an integer >= 2")
    s = _suffix_ratios(int(N), k_arr)
    l = np.arange(1, N + 1, dtype=float)[:, None]
    b = _excess(k_arr[None, :], 1.0 / l)
    dt = T / N
    out = dt * dt * np.sum((s * s * b)[::-1], axis=0)
    return out if np.ndim(k) else float(out[0])


def z_bound(N: int, T: float = 1.0) -> float:
    """Uniform bound on Z_{N,k}: 9 T^2 / N for N >= 3, a crude sum bound below."""
    if N >= 3:
        return 9.0 * T * T / N
    dt = T / N
    return dt * dt * sum((N - l + 1) ** 2 for l in range(1, N + 1))


def z_table(Ns: Iterable[int], ks: Sequence[int], T: float = 1.0) -> list[tuple[int, int, float, float]]:
    """Rows ``(N, k, z, bound)``."""
    rows = []
    ks = np.asarray(list(ks))
    for N in Ns:
        z = np.atleast_1d(z_nk(N, ks, T))
        bound = z_bound(N, T)
        rows.extend((int(N), int(k), float(v), bound) for k, v in zip(ks, z))
    return rows


# ------------------------------------------------------------- occupation

def heaviside_tail_bound(k_max: int) -> float:
    """
    Rigorous bound on sum_{k>k_max} a_k^2 for the Heaviside profile.

    a_k^2 k^{3/2} decreases along odd k (the squared ratio of consecutive
    values is (4m^2+8m+3)/(4m^2+8m+4) < 1), so with the
    first odd k0 > k_max and C = a_{k0}^2 k0^{3/2}, the tail is at most
    C (k0^{-3/2} + integral_{k0}^inf k^{-3/2} dk / 2) <= C (k0^{-3/2} + k0^{-1/2}).
    """
    k0 = k_max + 1 if k_max % 2 == 0 else k_max + 2
    h = hermite_zero(k0 - 1)[k0 - 1]
    C = h * h / (2.0 * math.pi * k0) * k0**1.5
    return C * (k0**-1.5 + k0**-0.5)


def occupation_error_norm(N: int, T: float = 1.0, k_max: int = 2001) -> ErrorEstimate:
    """
    ||1-Mart.Err||^2 of the occupation-time sum: sum_{k=2}^{k_max} Z_{N,k} a_k^2.

    The tail beyond k_max is bounded by z_bound(N, T) times the exact
    Heaviside tail mass; ``value`` is the truncated sum.
    """
    if k_max < 3:
        raise ValueError(f"k_max must be >= 3, got {k_max}")
    a = heaviside_coeffs(k_max)
    k = np.arange(3, k_max + 1, 2)                  # even k >= 2 carry a_k = 0
    z = np.atleast_1d(z_nk(N, k, T))
    value = math.fsum(z * a.a[k] ** 2)
    tail = z_bound(N, T) * min(a.tail_mass, heaviside_tail_bound(k_max))
    return ErrorEstimate(value, tail, value, False)


# ------------------------------------------------------------------ alpha

def _power_weights(N: int, n: int) -> np.ndarray:
    """(l/N)^n - ((l-1)/N)^n for l = 1..N without cancellation."""
    l = np.arange(1, N + 1, dtype=float)
    with np.errstate(divide="ignore"):
        frac = -np.expm1(n * np.log1p(-1.0 / l))
    frac[0] = 1.0
    return np.exp(n * np.log(l / N)) * frac


def alpha_index(A, n: int) -> float:
    """
    alpha_{N,n} = N^n sup_l A_l / sum_l A_l (l^n - (l-1)^n), 0 if the denominator is 0.

    Computed in the normalized form sup A / sum A_l ((l/N)^n - ((l-1)/N)^n).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 1 or A.size == 0:
        raise ValueError("A must be a non-empty vector")
    if np.any(A < 0):
        raise ValueError("A must be non-negative")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    den = math.fsum(A * _power_weights(A.size, n))
    if den == 0.0:
        return 0.0
    return float(A.max()) / den


def occupation_A(N: int, n: int, cancelled: bool = False) -> np.ndarray:
    """
    A_l = (2 pi n)^{-1} H_{n-1}(0)^2 (sum_{i=l}^N i^{-n/2})^2, l = 1..N.

    ``cancelled=True`` drops the constant prefactor, which vanishes for even
    n (H_{n-1}(0) = 0) and would otherwise force alpha = 0.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    i = np.arange(1, N + 1, dtype=float)
    suffix = np.cumsum((i ** (-0.5 * n))[::-1])[::-1]
    A = suffix**2
    if not cancelled:
        h = hermite_zero(n - 1)[n - 1]
        A = A * (h * h / (2.0 * math.pi * n))
    return A


def occupation_alpha(N: int, n: int) -> float:
    """
    Cancelled-form occupation index in scaled arithmetic, safe for large N and n.

    Factoring l^{-n} out of A_l leaves s_l = sum_{i>=l} (l/i)^{n/2} and
    alpha = N^n s_1^2 / sum_l s_l^2 (1 - (1 - 1/l)^n).
    """
    s = _suffix_ratios(N, np.array([float(n)]))[:, 0]
    l = np.arange(1, N + 1, dtype=float)
    with np.errstate(divide="ignore"):
        frac = -np.expm1(n * np.log1p(-1.0 / l))
    frac[0] = 1.0
    den = math.fsum(s * s * frac)
    return s[0] ** 2 * float(N) ** n / den


def fdp_index(x: ChaosSpectrum, n: int) -> float:
    """
    Index analog for a spectrum: (T^n / n!) sup_{|k|=n} E[d^k X]^2 / ||J_n X||^2.

    E[d^k X] = c_k sqrt(k!) dt^{-n/2}; returns 0 when J_n X = 0.  Equals 1 for
    terminal payoffs and alpha_{N,n} for additive functionals.
    """
    sel = x.degrees == n
    c = x.values[sel]
    den = math.fsum(c**2)
    if den == 0.0:
        return 0.0
    kfac = np.exp(gammaln(x.indices[sel] + 1.0).sum(axis=1))
    num = float(np.max(c**2 * kfac))
    return float(x.N) ** n * num / (math.factorial(n) * den)


# ------------------------------------------------------------ rate fitting

@dataclass(frozen=True)
class ErrorReport:
    """
    Log-log fit of ||Err|| = sqrt(err_sq) against N.

    ``slope``/``intercept``/``max_residual`` come from the largest half of
    the N range (at least three points); the ``full_*`` fields from all
    points.
    """

    points: tuple[tuple[int, float, float], ...]
    slope: float
    intercept: float
    max_residual: float
    full_slope: float
    full_intercept: float
    full_max_residual: float
    fit_from: int = field(default=0)


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    X = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(X, y, rcond=None)
    res = float(np.max(np.abs(y - (slope * x + icpt))))
    return float(slope), float(icpt), res


def rate_fit(points) -> ErrorReport:
    """
    Fit log sqrt(err_sq) = slope log N + intercept.

    ``points`` holds ``(N, err_sq)`` or ``(N, err_sq, tail_bound)`` tuples.

    Raises
    ------
    ValueError
        With fewer than three points, repeated N or non-positive err_sq.
    """
    pts = sorted((int(p[0]), float(p[1]), float(p[2]) if len(p) > 2 else 0.0) for p in points)
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points, got {len(pts)}")
    Ns = [p[0] for p in pts]
    if len(set(Ns)) != len(Ns):
        raise ValueError("N values must be distinct")
    if any(not (p[1] > 0 and math.isfinite(p[1])) for p in pts):
        raise ValueError("err_sq must be positive and finite")
    x = np.log(np.array(Ns, dtype=float))
    y = 0.5 * np.log(np.array([p[1] for p in pts]))
    full = _ols(x, y)
    start = len(pts) - max(3, math.ceil(len(pts) / 2))
    half = _ols(x[start:], y[start:])
    return ErrorReport(tuple(pts), *half, *full, fit_from=Ns[start])


def default_n_max(payoff, N: int) -> int:
    """Truncation degree for 1-D error sums that makes the tail bracket negligible."""
    name = getattr(payoff, "name", "")
    if name.startswith("power:"):
        return max(int(name.split(":")[1]), 2)
    if name == "sin":
        return 80
    return max(256, 40 * N)


def error_rate(a_for_N, Ns: Iterable[int], executor=None) -> ErrorReport:
    """
    Rate table for a terminal payoff.

    ``a_for_N(N)`` returns the :class:`OneDimCoeffs` to use at resolution N.
    """
    Ns = sorted(set(int(N) for N in Ns))

    def one(N):
        est = error_norm_1d(a_for_N(N), N)
        return (N, est.value, est.tail_bound)

    rows = list(executor.map(one, Ns)) if executor else [one(N) for N in Ns]
    return rate_fit(rows)


def occupation_rate(Ns: Iterable[int], T: float = 1.0, k_max: int = 2001,
                    executor=None) -> ErrorReport:
    """Rate table of the occupation-time error."""
    Ns = sorted(set(int(N) for N in Ns))

    def one(N):
        est = occupation_error_norm(N, T, k_max)
        return (N, est.value, est.tail_bound)

    rows = list(executor.map(one, Ns)) if executor else [one(N) for N in Ns]
    return rate_fit(rows)
