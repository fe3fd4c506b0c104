"""
Monte Carlo checks of the multi-level central limit theorem.

Sample paths come from a counter-based generator: the Gaussian for sample r
and increment i is a pure function of (seed, r, i), so any chunking or
thread layout reproduces the same matrix bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import comb, ndtri

from .clark_ocone import OneDimCoeffs, partial_sum_eval
from .hermite import gauss_hermite_rule, hermite_table
from .payoffs import Payoff
from .space import ChaosSpectrum, FunctionalSpec, InfeasibleError, TimeGrid, evaluate

__all__ = [
    "standard_normals",
    "sample_errors",
    "scaled_walk_samples",
    "LimitVariance",
    "limit_variance",
    "limit_variance_series",
    "CltReport",
    "clt_report",
    "write_clt_csv",
    "write_samples_csv",
]

_CHUNK = 8192


# ------------------------------------------------------------------ sampling

def _block_width(N: int) -> int:
    return 4 * ((N + 3) // 4)


def standard_normals(seed: int, N: int, start: int, stop: int) -> np.ndarray:
    """
    Standard normals for samples ``start..stop-1``, shape ``(stop-start, N)``.

    Sample r reads the Philox(key=seed) stream from counter r * ceil(N/4);
    each 64-bit word becomes a uniform ((w >> 11) + 1/2) 2^-53 in (0, 1)
    and then a Gaussian through the inverse normal CDF.
    """
    if not 0 <= seed < 2**128:
        raise ValueError(f"seed must lie in [0, 2^128), got {seed}")
    if stop <= start:
        return np.zeros((0, N))
    width = _block_width(N)
    bitgen = np.random.Philox(key=seed, counter=start * (width // 4))
    raw = bitgen.random_raw((stop - start) * width).reshape(stop - start, width)[:, :N]
    u = ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53
    return ndtri(u)


def _terminal_errors(payoff: Payoff, grid: TimeGrid, p_max: int, z: np.ndarray) -> np.ndarray:
    N, dt = grid.N, grid.dt
    dW = math.sqrt(dt) * z
    W = np.cumsum(dW, axis=1)
    err = payoff(W[:, -1]) - float(payoff.smoothed(0.0, grid.T, 0)[0])
    out = np.empty((z.shape[0], p_max + 1))
    out[:, 0] = err
    if p_max == 0:
        return out
    w_prev = W - dW                                                # W_{t_{l-1}}
    rest = grid.T - grid.times[:-1]                                # T - t_{l-1}
    smooth = payoff.smoothed(w_prev, rest[None, :], p_max)          # (p+1, M, N)
    h = hermite_table(p_max, z)
    for p in range(1, p_max + 1):
        # (dt/(T - t_{l-1}))^{p/2} E[F(W_{t_{l-1}} + sqrt(T - t_{l-1}) Z) H_p(Z)]
        # equals (dt^{p/2}/sqrt(p!)) E[d_l^p X | G_{l-1}]
        coef = (dt / rest) ** (0.5 * p) * smooth[p]
        err = err - np.sum(coef * h[p], axis=1)
        out[:, p] = dt ** (-0.5 * p) * err
    return out


def _spectrum_errors(x: ChaosSpectrum, p_max: int, z: np.ndarray) -> np.ndarray:
    dt = x.grid.dt
    dW = math.sqrt(dt) * z
    X = evaluate(x, dW)
    out = np.empty((z.shape[0], p_max + 1))
    for p in range(p_max + 1):
        out[:, p] = dt ** (-0.5 * p) * (X - partial_sum_eval(x, p, dW))
    return out


def sample_errors(x, grid: TimeGrid, p_max: int, M: int, seed: int,
                  chunk: int = _CHUNK) -> np.ndarray:
    """
    Rows of ((dt)^{-p/2} Err_N(p))(omega_j), p = 0..p_max, shape ``(M, p_max+1)``.

    ``x`` is a terminal :class:`FunctionalSpec` (or bare payoff), whose
    integrands come from the smoothing kernel, or a small-N
    :class:`ChaosSpectrum`.

    Raises
    ------
    InfeasibleError
        For additive or raw functionals, which have no pathwise integrands.
    """
    if p_max < 0 or M < 1:
        raise ValueError("need p_max >= 0 and M >= 1")
    if isinstance(x, FunctionalSpec):
        if x.kind != "terminal":
            raise InfeasibleError(
                f"pathwise integrands are available for terminal payoffs only; got {x.kind!r}. "
                "Project a small-N spectrum and pass it instead"
            )
        x = x.payoff
    if isinstance(x, ChaosSpectrum):
        if x.grid != grid:
            raise ValueError("spectrum grid differs from the sampling grid")
        if p_max > x.n_max:
            raise ValueError(f"p_max={p_max} exceeds the spectrum degree {x.n_max}")
        kernel = lambda z: _spectrum_errors(x, p_max, z)  # noqa: E731
    elif isinstance(x, Payoff):
        kernel = lambda z: _terminal_errors(x, grid, p_max, z)  # noqa: E731
    else:
        raise TypeError(f"cannot sample errors of {x!r}")
    out = np.empty((M, p_max + 1))
    for s in range(0, M, chunk):
        e = min(M, s + chunk)
        out[s:e] = kernel(standard_normals(seed, grid.N, s, e))
    return out


def scaled_walk_samples(grid: TimeGrid, p_max: int, M: int, seed: int,
                        chunk: int = _CHUNK) -> np.ndarray:
    """Column p holds sum_l sqrt(dt) H_{p+1}(dW_l/sqrt(dt)), variance T for every p."""
    out = np.empty((M, p_max + 1))
    for s in range(0, M, chunk):
        e = min(M, s + chunk)
        h = hermite_table(p_max + 1, standard_normals(seed, grid.N, s, e))
        out[s:e] = math.sqrt(grid.dt) * h[1:].sum(axis=2).T
    return out


# ------------------------------------------------------------ limit variance

@dataclass(frozen=True)
class LimitVariance:
    """
    Variance of the level-p limit integral.

    ``endpoint_excluded`` marks an integrand without a finite limit at t = T;
    the last panel is then replaced by a power-law estimate ``tail`` and
    ``infinite`` is set when the fitted exponent makes it diverge.
    """

    value: float
    tail: float = 0.0
    exponent: float = 0.0
    endpoint_excluded: bool = False
    infinite: bool = False

    def __float__(self) -> float:
        return self.value


def _gauss_expect(fun, t: float, kinks: tuple, quad_order: int) -> float:
    # E[fun(W_t)] with W_t ~ N(0, t)
    if t == 0.0:
        return float(fun(np.zeros(1))[0])
    sd = math.sqrt(t)
    if not kinks:
        rule = gauss_hermite_rule(quad_order)
        return float(rule.expect(fun(sd * rule.nodes)))
    lo = min(kinks) - 12.0 * sd
    hi = max(kinks) + 12.0 * sd
    dens = lambda x: math.exp(-0.5 * x * x / t) / math.sqrt(2.0 * math.pi * t)  # noqa: E731
    val, _ = integrate.quad(lambda x: float(fun(np.array([x]))[0]) * dens(x), lo, hi,
                            points=sorted(set(kinks)), limit=400, epsabs=1e-13, epsrel=1e-11)
    return val


def limit_variance(payoff, T: float, p: int, grid_points: int = 513,
                   quad_order: int = 64) -> LimitVariance:
    """
    (1/(p+1)!) int_0^T E[(E[D_t^{p+1} F(W_T) | F_t])^2] dt.

    With m = p+1 and s = T - t the conditional derivative is
    g_t(x) = s^{-m/2} sqrt(m!) E[F(x + sqrt(s) Z) H_m(Z)], so the integrand
    is s^{-m} E[smoothed_m(W_t, s)^2].  Trapezoid rule in t; the endpoint
    uses the classical derivative when F^{(m)} exists.
    """
    F = payoff.payoff if isinstance(payoff, FunctionalSpec) else payoff
    if p < 0 or grid_points < 4:
        raise ValueError("need p >= 0 and grid_points >= 4")
    m = p + 1
    kinks = tuple(getattr(F, "kinks", ()))
    t = np.linspace(0.0, T, grid_points)
    f = np.empty(grid_points)
    for j, tj in enumerate(t[:-1]):
        s = T - tj
        fun = lambda x, s=s: F.smoothed(x, s, m)[m] ** 2  # noqa: E731
        f[j] = s ** (-m) * _gauss_expect(fun, float(tj), kinks, quad_order)
    regular = F.is_regular(m) and F.derivative(np.zeros(1), m) is not None
    if regular:
        fun = lambda x: np.asarray(F.derivative(x, m), dtype=float) ** 2  # noqa: E731
        f[-1] = _gauss_expect(fun, T, kinks, quad_order) / math.factorial(m)
        return LimitVariance(float(integrate.trapezoid(f, t)))
    h = t[1] - t[0]
    body = float(integrate.trapezoid(f[:-1], t[:-1]))
    expo = math.log(f[-2] / f[-3]) / math.log(2.0) if f[-3] > 0 and f[-2] > 0 else 0.0
    if expo >= 1.0:
        return LimitVariance(math.inf, math.inf, float(expo), True, True)
    tail = float(f[-2] * h / (1.0 - expo))
    return LimitVariance(body + tail, tail, float(expo), True, False)


def limit_variance_series(a: OneDimCoeffs, p: int) -> float:
    """
    Same variance from the chaos profile:
    T^{1-m} sum_j C(m+j, m) a_{m+j}^2 / (j+1), m = p+1 (truncated at a.n_max).
    """
    m = p + 1
    if a.n_max < m:
        return 0.0
    j = np.arange(a.n_max - m + 1)
    terms = comb(m + j, m) * a.a[m:] ** 2 / (j + 1.0)
    return a.T ** (1 - m) * math.fsum(terms)


# ------------------------------------------------------------------- report

@dataclass(frozen=True)
class CltReport:
    """
    Second-moment comparison of scaled error levels with their limits.

    ``z_scores`` is NaN for levels flagged ``degenerate`` (zero sample
    variance) or with an infinite limit.
    """

    N: int | None
    levels: np.ndarray
    sample_var: np.ndarray
    se: np.ndarray
    limit_var: np.ndarray
    cross_cov: np.ndarray
    cross_cov_se: np.ndarray
    z_scores: np.ndarray
    degenerate: np.ndarray
    kurtosis: np.ndarray
    kurtosis_se: float
    M: int
    seed: int | None

    def rows(self):
        """CSV rows ``p, sample_var, se, limit_var, z``."""
        return [(int(p), float(v), float(e), float(l), float(z)) for p, v, e, l, z in
                zip(self.levels, self.sample_var, self.se, self.limit_var, self.z_scores)]


def _jackknife_se(e: np.ndarray) -> float:
    # leave-one-out estimates of sum(e)/(M-1) style moments share the closed form
    # v_(i) - mean = -(M / ((M-1)(M-2))) (e_i - mean(e))
    M = e.size
    dev = e - e.mean()
    spread = math.sqrt(float(np.sum(dev * dev)))
    return math.sqrt((M - 1) / M) * M / ((M - 1) * (M - 2)) * spread


def clt_report(samples, limits, N: int | None = None, seed: int | None = None) -> CltReport:
    """
    Sample variances with jackknife standard errors, cross-covariances and z-scores.

    Raises
    ------
    ValueError
        If the column count differs from ``len(limits)`` or fewer than 3 rows.
    """
    X = np.asarray(samples, dtype=float)
    lim = np.asarray(limits, dtype=float)
    if X.ndim != 2 or X.shape[1] != lim.size:
        raise ValueError(f"samples have {X.shape[-1]} columns, limits {lim.size}")
    M, P = X.shape
    if M < 3:
        raise ValueError("need at least 3 samples")
    D = X - X.mean(axis=0)
    cov = D.T @ D / (M - 1)
    cov = 0.5 * (cov + cov.T)
    se_cov = np.zeros((P, P))
    for i in range(P):
        for j in range(i, P):
            se_cov[i, j] = se_cov[j, i] = _jackknife_se(D[:, i] * D[:, j])
    var = np.diag(cov).copy()
    se = np.diag(se_cov).copy()
    degenerate = ~(var > 0) | ~(se > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(degenerate | ~np.isfinite(lim), np.nan, (var - lim) / se)
        m4 = np.mean(D**4, axis=0)
        m2 = np.mean(D**2, axis=0)
        kurt = np.where(m2 > 0, m4 / m2**2 - 3.0, np.nan)
    return CltReport(N, np.arange(P), var, se, lim, cov, se_cov, z, degenerate, kurt,
                     math.sqrt(24.0 / M), M, seed)


def write_clt_csv(report: CltReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p", "sample_var", "se", "limit_var", "z"])
        for p, v, e, l, z in report.rows():
            w.writerow([p, f"{v:.16e}", f"{e:.16e}", f"{l:.16e}", f"{z:.16e}"])


def write_samples_csv(samples: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id"] + [f"err_{p}" for p in range(samples.shape[1])])
        for i, row in enumerate(samples):
            w.writerow([i] + [f"{v:.16e}" for v in row])
