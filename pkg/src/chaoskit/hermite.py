"""
Normalized probabilists' Hermite polynomials and Gauss-Hermite rules.

Everything here uses the orthonormal normalization

    H_n(x) = (-1)^n / sqrt(n!) * exp(x^2/2) d^n/dx^n exp(-x^2/2),

so that E[H_i(Z) H_j(Z)] = delta_ij for Z ~ N(0, 1).  The monic He_n only
appears implicitly inside the root finder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "ConvergenceError",
    "QuadratureRule",
    "hermite_eval",
    "hermite_table",
    "hermite_zero",
    "gauss_hermite_rule",
]

NEWTON_TOL = 1e-13
NEWTON_MAXITER = 100


class ConvergenceError(ArithmeticError):
    """Raised when an iterative scheme fails to reach its tolerance."""


def hermite_table(n_max: int, x) -> np.ndarray:
    """
    Evaluate H_0, ..., H_{n_max} at every point of ``x``.

    Parameters
    ----------
    n_max : int
        Highest degree, ``n_max >= 0``.
    x : array_like
        Evaluation points, any shape.

    Returns
    -------
    numpy.ndarray
        Array of shape ``(n_max + 1,) + np.shape(x)``.
    """
    if n_max < 0:
        raise ValueError(f"n_max must be non-negative, got {n_max}")
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = x
    # sqrt(n+1) H_{n+1} = x H_n - sqrt(n) H_{n-1}
    for n in range(1, n_max):
        out[n + 1] = (x * out[n] - math.sqrt(n) * out[n - 1]) / math.sqrt(n + 1)
    return out


def hermite_eval(n: int, x):
    """Return H_n(x); scalar in, float out, array in, array out."""
    if n < 0:
        raise ValueError(f"degree must be non-negative, got {n}")
    value = hermite_table(n, x)[n]
    return float(value) if np.ndim(value) == 0 else value


@lru_cache(maxsize=None)
def _zeros_squared_even(m_max: int) -> np.ndarray:
    # H_{2m}(0)^2 = (2m-1)!!^2 / (2m)! = prod_{j<=m} (2j-1)/(2j)
    ratios = (2.0 * np.arange(1, m_max + 1) - 1.0) / (2.0 * np.arange(1, m_max + 1))
    out = np.empty(m_max + 1)
    out[0] = 1.0
    out[1:] = np.cumprod(ratios)
    out.flags.writeable = False
    return out


def hermite_zero(n_max: int) -> np.ndarray:
    """
    Closed-form values H_n(0) for n = 0..n_max.

    Odd degrees vanish; H_{2m}(0) = (-1)^m (2m-1)!! / sqrt((2m)!).  Built from
    a running product so it stays accurate for n in the millions.
    """
    out = np.zeros(n_max + 1)
    m = np.arange(0, n_max // 2 + 1)
    sq = _zeros_squared_even(n_max // 2)
    out[0::2] = np.where(m % 2 == 0, 1.0, -1.0) * np.sqrt(sq)
    return out


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Hermite rule for the standard Gaussian weight (weights sum to 1)."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def expect(self, values) -> np.ndarray:
        """Contract the last axis of ``values`` (sampled at ``nodes``) with the weights."""
        return np.asarray(values) @ self.weights


def _initial_guesses(order: int) -> np.ndarray:
    # Golub-Welsch eigenvalues are accurate to a few ulps times the condition
    # number; Newton below polishes them to the stated tolerance.
    off = np.sqrt(np.arange(1, order, dtype=float))
    jacobi = np.diag(off, 1) + np.diag(off, -1)
    return np.linalg.eigvalsh(jacobi)


@lru_cache(maxsize=64)
def gauss_hermite_rule(order: int) -> QuadratureRule:
    """
    Gauss-Hermite rule of the given order against exp(-x^2/2)/sqrt(2 pi).

    Nodes are the roots of He_order, refined by Newton's method on the
    orthonormal H_order (whose derivative is sqrt(order) H_{order-1}).
    Weights follow from the Christoffel formula 1 / (order H_{order-1}(x)^2)
    and are renormalized to sum to one.

    Raises
    ------
    ConvergenceError
        If Newton's method does not reach a relative step of 1e-13.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if order == 1:
        nodes = np.zeros(1)
        weights = np.ones(1)
    else:
        x = _initial_guesses(order)
        for _ in range(NEWTON_MAXITER):
            table = hermite_table(order, x)
            step = table[order] / (math.sqrt(order) * table[order - 1])
            x = x - step
            if np.all(np.abs(step) <= NEWTON_TOL * np.maximum(1.0, np.abs(x))):
                break
        else:
            raise ConvergenceError(
                f"Gauss-Hermite nodes of order {order} did not converge to {NEWTON_TOL}"
            )
        x = np.sort(x)
        # enforce exact symmetry
        x = 0.5 * (x - x[::-1])
        if order % 2 == 1:
            x[order // 2] = 0.0
        h_prev = hermite_table(order - 1, x)[order - 1]
        # divide twice: h_prev**2 overflows at the outer nodes of large rules
        weights = (1.0 / order) / np.abs(h_prev) / np.abs(h_prev)
        weights = 0.5 * (weights + weights[::-1])
        weights /= math.fsum(weights)
        nodes = x
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureRule(order=order, nodes=nodes, weights=weights)
