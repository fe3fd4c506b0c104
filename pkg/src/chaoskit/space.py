"""
The discrete Wiener space (R^N, mu^N) in coefficient form.

A square-integrable functional X of the increments (dW_1, ..., dW_N) is held
as its chaos spectrum

    X = sum_k c_k prod_i H_{k_i}(dW_i / sqrt(dt)),

a sparse map from multi-indices to reals.  Conditional expectation, the
per-increment derivative and Sobolev norms all act on the coefficients
directly, so non-smooth functionals need no special treatment.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

from .hermite import gauss_hermite_rule, hermite_table
from .payoffs import Payoff

__all__ = [
    "InfeasibleError",
    "TimeGrid",
    "degree",
    "trailing",
    "enumerate_indices",
    "ChaosSpectrum",
    "FunctionalSpec",
    "TENSOR_BUDGET",
    "project_chaos",
    "evaluate",
    "conditional_expectation",
    "derivative",
    "sobolev_norm",
    "write_spectrum_csv",
    "read_spectrum_csv",
]

#: maximum number of tensor quadrature evaluations allowed in one projection
TENSOR_BUDGET = 10**8


class InfeasibleError(RuntimeError):
    """Raised when a requested computation exceeds a feasibility guard."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition t_k = k T / N of [0, T]."""

    N: int
    T: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if not (math.isfinite(self.T) and self.T > 0):
            raise ValueError(f"T must be positive and finite, got {self.T}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "T", float(self.T))

    @property
    def dt(self) -> float:
        return self.T / self.N

    def t(self, k):
        """Grid time(s) t_k; ``k`` may be an integer or an array of integers."""
        return np.asarray(k) * self.T / self.N if np.ndim(k) else k * self.T / self.N

    @property
    def times(self) -> np.ndarray:
        """All grid points t_0, ..., t_N."""
        return np.arange(self.N + 1) * (self.T / self.N)


# ---------------------------------------------------------------- multi-indices

def degree(k) -> np.ndarray | int:
    """Total degree sum(k) of one index (tuple) or of every row of an array."""
    arr = np.asarray(k)
    return int(arr.sum()) if arr.ndim == 1 else arr.sum(axis=-1)


def trailing(k) -> np.ndarray | int:
    """Largest 1-based position l with k_l > 0, or 0 for the zero index."""
    arr = np.atleast_2d(np.asarray(k))
    nz = arr > 0
    n = arr.shape[1]
    out = np.where(nz.any(axis=1), n - np.argmax(nz[:, ::-1], axis=1), 0)
    return int(out[0]) if np.ndim(k) == 1 else out


def enumerate_indices(N: int, n_max: int, support: int | None = None) -> np.ndarray:
    """
    All multi-indices of length N with degree <= n_max, lexicographic order.

    If ``support`` is given only the first ``support`` coordinates may be
    nonzero.
    """
    d = N if support is None else support
    rows: list[tuple[int, ...]] = []

    def rec(prefix: list[int], left: int):
        if len(prefix) == d:
            rows.append(tuple(prefix) + (0,) * (N - d))
            return
        for v in range(left + 1):
            prefix.append(v)
            rec(prefix, left - v)
            prefix.pop()

    rec([], n_max)
    return np.array(rows, dtype=np.int64).reshape(len(rows), N)


def _lex_order(indices: np.ndarray) -> np.ndarray:
    if indices.shape[0] == 0:
        return np.zeros(0, dtype=np.intp)
    return np.lexsort(indices.T[::-1])


# ------------------------------------------------------------------- spectrum

class ChaosSpectrum:
    """
    Immutable sparse chaos expansion on a fixed grid.

    Parameters
    ----------
    grid : TimeGrid
    coeffs : mapping or None
        ``{multi-index tuple: coefficient}``.  Zero coefficients are dropped.
    n_max : int
        Truncation degree; every index present must have degree <= n_max.
    """

    __slots__ = ("grid", "n_max", "indices", "values", "_map")

    def __init__(self, grid: TimeGrid, coeffs: Mapping[tuple, float] | None = None,
                 n_max: int = 0):
        items = list((coeffs or {}).items())
        N = grid.N
        idx = np.array([tuple(k) for k, _ in items], dtype=np.int64).reshape(len(items), N) \
            if items else np.zeros((0, N), dtype=np.int64)
        val = np.array([float(v) for _, v in items], dtype=float)
        self._init(grid, idx, val, n_max)

    @classmethod
    def from_arrays(cls, grid: TimeGrid, indices, values, n_max: int) -> "ChaosSpectrum":
        """Build from an ``(K, N)`` index array and matching values."""
        obj = cls.__new__(cls)
        idx = np.asarray(indices, dtype=np.int64).reshape(-1, grid.N)
        obj._init(grid, idx, np.asarray(values, dtype=float).reshape(-1), n_max)
        return obj

    def _init(self, grid, idx, val, n_max):
        if n_max < 0:
            raise ValueError(f"n_max must be non-negative, got {n_max}")
        if idx.shape[0] != val.shape[0]:
            raise ValueError("indices and values differ in length")
        if np.any(idx < 0):
            raise ValueError("multi-indices must be non-negative")
        if idx.shape[0] and idx.sum(axis=1).max() > n_max:
            raise ValueError(f"index of degree above n_max={n_max}")
        keep = val != 0.0
        idx, val = idx[keep], val[keep]
        if idx.shape[0]:
            order = _lex_order(idx)
            idx, val = idx[order], val[order]
            dup = np.all(idx[1:] == idx[:-1], axis=1)
            if dup.any():
                raise ValueError("duplicate multi-index in spectrum")
        idx.flags.writeable = False
        val.flags.writeable = False
        self.grid = grid
        self.n_max = int(n_max)
        self.indices = idx
        self.values = val
        self._map = None

    # mapping-style access
    @property
    def coeffs(self) -> Mapping[tuple, float]:
        if self._map is None:
            self._map = MappingProxyType(
                {tuple(int(v) for v in k): float(c) for k, c in zip(self.indices, self.values)}
            )
        return self._map

    def __getitem__(self, k) -> float:
        return self.coeffs.get(tuple(k), 0.0)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __iter__(self):
        return iter(self.coeffs.items())

    def __repr__(self) -> str:
        return f"ChaosSpectrum(N={self.grid.N}, T={self.grid.T}, n_max={self.n_max}, terms={len(self)})"

    @property
    def N(self) -> int:
        return self.grid.N

    @property
    def degrees(self) -> np.ndarray:
        return self.indices.sum(axis=1)

    @property
    def trailing(self) -> np.ndarray:
        return trailing(self.indices) if len(self) else np.zeros(0, dtype=np.int64)

    @property
    def mean(self) -> float:
        return self[(0,) * self.N]

    def norm_sq(self) -> float:
        """E[X^2] by Parseval, compensated summation."""
        return math.fsum(self.values**2)

    def variance(self) -> float:
        return math.fsum(self.values[self.degrees > 0] ** 2)

    def chop(self, tol: float) -> "ChaosSpectrum":
        """Drop coefficients with absolute value below ``tol``."""
        keep = np.abs(self.values) >= tol
        return ChaosSpectrum.from_arrays(self.grid, self.indices[keep], self.values[keep], self.n_max)

    def with_n_max(self, n_max: int) -> "ChaosSpectrum":
        """Truncate to degree <= n_max (never raises the recorded n_max silently)."""
        keep = self.degrees <= n_max
        return ChaosSpectrum.from_arrays(self.grid, self.indices[keep], self.values[keep], n_max)

    def allclose(self, other: "ChaosSpectrum", atol: float = 0.0, rtol: float = 0.0) -> bool:
        keys = set(self.coeffs) | set(other.coeffs)
        return all(
            abs(self[k] - other[k]) <= atol + rtol * max(abs(self[k]), abs(other[k]))
            for k in keys
        )

    def __add__(self, other: "ChaosSpectrum") -> "ChaosSpectrum":
        if other.grid != self.grid:
            raise ValueError("spectra live on different grids")
        merged = dict(self.coeffs)
        for k, c in other:
            merged[k] = merged.get(k, 0.0) + c
        return ChaosSpectrum(self.grid, merged, max(self.n_max, other.n_max))


# ----------------------------------------------------------------- functionals

@dataclass(frozen=True)
class FunctionalSpec:
    """
    Description of a functional of the increments.

    kind
        ``"terminal"``: X = F(W_T) for a payoff F.
        ``"additive"``: X = sum_i f(t_i, W_{t_i}) dt.  ``integrand`` is a
        payoff (time-homogeneous f) or a callable ``t -> Payoff``.
        ``"raw"``: X = func(increments) for a vectorized callable taking an
        ``(M, N)`` array of increments and returning ``M`` values.
    """

    kind: str
    payoff: Payoff | None = None
    integrand: Payoff | Callable[[float], Payoff] | None = None
    func: Callable[[np.ndarray], np.ndarray] | None = None
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind == "terminal" and self.payoff is None:
            raise ValueError("terminal functional needs a payoff")
        if self.kind == "additive" and self.integrand is None:
            raise ValueError("additive functional needs an integrand")
        if self.kind == "raw" and self.func is None:
            raise ValueError("raw functional needs a callable")
        if self.kind not in ("terminal", "additive", "raw"):
            raise ValueError(f"unknown functional kind {self.kind!r}")

    @classmethod
    def terminal(cls, payoff: Payoff) -> "FunctionalSpec":
        return cls("terminal", payoff=payoff, label=getattr(payoff, "name", ""))

    @classmethod
    def additive(cls, integrand) -> "FunctionalSpec":
        return cls("additive", integrand=integrand, label=getattr(integrand, "name", "additive"))

    @classmethod
    def raw(cls, func, label: str = "raw") -> "FunctionalSpec":
        return cls("raw", func=func, label=label)

    def profile_at(self, t: float) -> Payoff:
        """The payoff x -> f(t, x) of an additive functional."""
        f = self.integrand
        return f if isinstance(f, Payoff) else f(t)

    def __call__(self, increments, grid: TimeGrid) -> np.ndarray:
        """Evaluate on an ``(M, N)`` (or length-N) array of increments."""
        inc = np.atleast_2d(np.asarray(increments, dtype=float))
        if inc.shape[1] != grid.N:
            raise ValueError(f"expected {grid.N} increments per row, got {inc.shape[1]}")
        if self.kind == "terminal":
            out = self.payoff(inc.sum(axis=1))
        elif self.kind == "additive":
            w = np.cumsum(inc, axis=1)
            out = np.zeros(inc.shape[0])
            for i in range(1, grid.N + 1):
                out += self.profile_at(grid.t(i))(w[:, i - 1]) * grid.dt
        else:
            out = np.asarray(self.func(inc), dtype=float)
        return out if np.ndim(increments) == 2 else out[0]


# ------------------------------------------------------------------ projection

def _contract(vals: np.ndarray, hw: np.ndarray, n_axes: int) -> np.ndarray:
    # vals has shape (lead..., q, ..., q) with n_axes trailing quadrature axes;
    # each is replaced by an (n_max+1) Hermite axis, order preserved
    lead = vals.ndim - n_axes
    for j in range(n_axes):
        vals = np.tensordot(vals, hw, axes=([lead + j], [1]))
        vals = np.moveaxis(vals, -1, lead + j)
    return vals


def _sum_grid(nodes: np.ndarray, d: int, scale: float) -> np.ndarray:
    # sqrt(dt) * (z_1 + ... + z_d) on the full tensor grid
    out = np.zeros(())
    for _ in range(d):
        out = np.add.outer(out, nodes)
    return scale * out


def _term_tensor(profile: Payoff, d: int, grid: TimeGrid, n_max: int, quad_order: int):
    """
    Hermite coefficients of X = F(W_{t_d}) over coordinates 1..d.

    The first d-1 coordinates use tensor Gauss-Hermite; the last one is
    integrated exactly through the payoff's smoothing kernel, since
    E[F(x + dW_d) H_m(dW_d/sqrt(dt))] = profile.smoothed(x, dt, m).
    """
    rule = gauss_hermite_rule(quad_order)
    hw = hermite_table(n_max, rule.nodes) * rule.weights
    sq = math.sqrt(grid.dt)
    if d - 1 == 0:
        return profile.smoothed(np.zeros(()), grid.dt, n_max, quad_order)
    x = _sum_grid(rule.nodes, d - 1, sq)
    last = profile.smoothed(x, grid.dt, n_max, quad_order)        # (n+1, q, ..., q)
    coef = _contract(last, hw, d - 1)                             # (n+1 [k_d], k_1..k_{d-1})
    return np.moveaxis(coef, 0, -1)                               # (k_1..k_d)


def _raw_tensor(func, grid: TimeGrid, n_max: int, quad_order: int):
    rule = gauss_hermite_rule(quad_order)
    hw = hermite_table(n_max, rule.nodes) * rule.weights
    N, q = grid.N, quad_order
    sq = math.sqrt(grid.dt)
    rest = np.stack(np.meshgrid(*([rule.nodes] * (N - 1)), indexing="ij"), axis=-1) \
        .reshape(-1, N - 1) if N > 1 else np.zeros((1, 0))
    out = np.zeros((n_max + 1,) * N)
    for a in range(q):
        pts = np.concatenate([np.full((rest.shape[0], 1), rule.nodes[a]), rest], axis=1) * sq
        vals = np.asarray(func(pts), dtype=float).reshape((q,) * (N - 1))
        slab = _contract(vals, hw, N - 1) if N > 1 else vals
        out += np.multiply.outer(hw[:, a], slab)
    return out


def _tensor_to_spectrum(tensor: np.ndarray, grid: TimeGrid, n_max: int, chop: float):
    d = tensor.ndim
    idx = np.argwhere(np.ones(tensor.shape, dtype=bool))
    deg_ok = idx.sum(axis=1) <= n_max
    idx = idx[deg_ok]
    val = tensor[tuple(idx.T)]
    full = np.zeros((idx.shape[0], grid.N), dtype=np.int64)
    full[:, :d] = idx
    if chop > 0 and val.size:
        norm = math.sqrt(math.fsum(val**2))
        val = np.where(np.abs(val) <= chop * norm, 0.0, val)
    return ChaosSpectrum.from_arrays(grid, full, val, n_max)


def _check_budget(points: int, what: str):
    if points > TENSOR_BUDGET:
        raise InfeasibleError(
            f"{what} needs {points:.3g} tensor quadrature evaluations "
            f"(budget {TENSOR_BUDGET:.0e}); reduce N or quad_order, or use the "
            "closed-form 1-D / additive constructors"
        )


def project_chaos(x: FunctionalSpec, grid: TimeGrid, n_max: int, quad_order: int = 64,
                  chop: float = 1e-14) -> ChaosSpectrum:
    """
    Chaos coefficients c_k = E[X prod_i H_{k_i}(dW_i/sqrt(dt))] up to degree n_max.

    Parameters
    ----------
    x : FunctionalSpec
    grid : TimeGrid
    n_max : int
    quad_order : int
        Gauss-Hermite order per coordinate, at least ``n_max + 1``.
    chop : float
        Coefficients below ``chop * ||X||`` are treated as quadrature noise.

    Raises
    ------
    InfeasibleError
        If ``quad_order ** N`` exceeds the tensor budget.
    """
    if n_max < 0:
        raise ValueError(f"n_max must be non-negative, got {n_max}")
    if quad_order < n_max + 1:
        raise ValueError(f"quad_order={quad_order} must be at least n_max+1={n_max + 1}")
    N = grid.N
    _check_budget(quad_order**N, "project_chaos")
    if (n_max + 1) ** N > TENSOR_BUDGET:
        raise InfeasibleError(f"coefficient tensor (n_max+1)^N = {(n_max + 1) ** N:.3g} too large")
    if x.kind == "terminal":
        tensor = _term_tensor(x.payoff, N, grid, n_max, quad_order)
    elif x.kind == "additive":
        tensor = np.zeros((n_max + 1,) * N)
        for i in range(1, N + 1):
            part = _term_tensor(x.profile_at(grid.t(i)), i, grid, n_max, quad_order)
            tensor[(slice(None),) * i + (0,) * (N - i)] += grid.dt * part
    else:
        tensor = _raw_tensor(x.func, grid, n_max, quad_order)
    return _tensor_to_spectrum(tensor, grid, n_max, chop)


# -------------------------------------------------------------- operations

def evaluate(x: ChaosSpectrum, point, chunk: int = 4096):
    """
    Synthesize sum_k c_k prod_i H_{k_i}(point_i / sqrt(dt)).

    ``point`` may be a length-N vector (returns a float) or an ``(M, N)``
    array (returns M values).
    """
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != x.N:
        raise ValueError(f"point has {pts.shape[1]} coordinates, spectrum has N={x.N}")
    out = np.empty(pts.shape[0])
    if len(x) == 0:
        out[:] = 0.0
        return 0.0 if single else out
    inv = 1.0 / math.sqrt(x.grid.dt)
    for s in range(0, pts.shape[0], chunk):
        block = pts[s:s + chunk]
        table = hermite_table(x.n_max, block * inv)               # (n+1, m, N)
        prod = np.ones((len(x), block.shape[0]))
        for i in range(x.N):
            col = x.indices[:, i]
            if np.any(col):
                prod *= table[col, :, i]
        out[s:s + chunk] = x.values @ prod
    return float(out[0]) if single else out


def _check_level(l: int, lo: int, hi: int):
    if int(l) != l or not lo <= l <= hi:
        raise ValueError(f"level l={l} outside [{lo}, {hi}]")


def conditional_expectation(x: ChaosSpectrum, l: int) -> ChaosSpectrum:
    """E[X | G_l]: keep the coefficients whose index vanishes after position l."""
    _check_level(l, 0, x.N)
    keep = x.trailing <= l
    return ChaosSpectrum.from_arrays(x.grid, x.indices[keep], x.values[keep], x.n_max)


def derivative(x: ChaosSpectrum, l: int) -> ChaosSpectrum:
    """
    Per-increment derivative d/d(dW_l) as a ladder operator.

    Output coefficient at k is sqrt((k_l + 1) / dt) * c(k + e_l); the
    truncation degree drops by one.
    """
    _check_level(l, 1, x.N)
    col = x.indices[:, l - 1]
    keep = col > 0
    idx = x.indices[keep].copy()
    idx[:, l - 1] -= 1
    vals = np.sqrt(col[keep] / x.grid.dt) * x.values[keep]
    return ChaosSpectrum.from_arrays(x.grid, idx, vals, max(x.n_max - 1, 0))


def sobolev_norm(x: ChaosSpectrum, s: float) -> float:
    """sum_k (1 + |k|)^s c_k^2; s = 0 gives E[X^2]."""
    return math.fsum((1.0 + x.degrees) ** float(s) * x.values**2)


# ---------------------------------------------------------------------- CSV

def write_spectrum_csv(x: ChaosSpectrum, path) -> None:
    """Dump as ``k_1,...,k_N,coeff`` with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"k_{i}" for i in range(1, x.N + 1)] + ["coeff"])
        for k, c in zip(x.indices, x.values):
            w.writerow([int(v) for v in k] + [f"{c:.16e}"])


def read_spectrum_csv(path, T: float, n_max: int | None = None) -> ChaosSpectrum:
    """Inverse of :func:`write_spectrum_csv`; the horizon is not stored in the file."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    N = len(header) - 1
    idx = np.array([[int(v) for v in r[:-1]] for r in body], dtype=np.int64).reshape(-1, N)
    val = np.array([float(r[-1]) for r in body])
    deg = int(idx.sum(axis=1).max()) if len(body) else 0
    return ChaosSpectrum.from_arrays(TimeGrid(N, T), idx, val, deg if n_max is None else n_max)

