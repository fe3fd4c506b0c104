"""
Scalar payoff descriptors and their Gaussian-smoothed Hermite moments.

The one primitive every other module needs is

    smoothed(x, s, m) = E[F(x + sqrt(s) Z) H_m(Z)],   Z ~ N(0, 1),

evaluated for m = 0..m_max.  By Gaussian integration by parts this equals
s^{m/2} / sqrt(m!) * E[F^{(m)}(x + sqrt(s) Z)], which is how conditional
expectations of (distributional) derivatives are obtained without ever
differentiating F pointwise.  The catalog payoffs have closed forms; a
generic callable falls back to Gauss-Hermite quadrature.
"""

from __future__ import annotations

import math
import re
from typing import Callable

import numpy as np
from scipy.special import factorial2, gammaln, ndtr

from .hermite import gauss_hermite_rule, hermite_table

__all__ = [
    "PayoffGrammarError",
    "Payoff",
    "Heaviside",
    "Call",
    "Power",
    "Sine",
    "CallablePayoff",
    "parse_payoff",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class PayoffGrammarError(ValueError):
    """Raised for payoff descriptors outside ``heaviside | call:<K> | power:<p> | sin``."""


def _phi(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(z))


def _log_sqrt_factorials(m_max: int) -> np.ndarray:
    return 0.5 * gammaln(np.arange(m_max + 1) + 1.0)


class Payoff:
    """
    Base class for a scalar function F of one real variable.

    Subclasses override ``smoothed`` with a closed form where one exists.
    ``regular_order`` is the highest m for which F^{(m)} is a genuine
    function (``None`` meaning every order).
    """

    name = "payoff"
    regular_order: int | None = None
    #: points where F or one of its low derivatives jumps
    kinks: tuple[float, ...] = ()

    def __call__(self, x):
        raise NotImplementedError

    def smoothed(self, x, s, m_max: int, quad_order: int = 64) -> np.ndarray:
        """E[F(x + sqrt(s) Z) H_m(Z)] for m = 0..m_max, shape ``(m_max+1,) + broadcast(x, s)``."""
        x, s = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(s, dtype=float))
        rule = gauss_hermite_rule(quad_order)
        hw = hermite_table(m_max, rule.nodes) * rule.weights
        vals = self(x[..., None] + np.sqrt(s)[..., None] * rule.nodes)
        return np.moveaxis(vals @ hw.T, -1, 0)

    def derivative(self, x, m: int):
        """Classical F^{(m)}(x), or ``None`` if it is only a distribution."""
        return None

    def second_moment(self, T: float) -> float | None:
        """E[F(W_T)^2] in closed form, or ``None`` if unknown."""
        return None

    def is_regular(self, m: int) -> bool:
        return self.regular_order is None or m <= self.regular_order

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__} {self.name}>"


class Heaviside(Payoff):
    """Indicator 1_{[0, inf)}."""

    name = "heaviside"
    regular_order = 0
    kinks = (0.0,)

    def __call__(self, x):
        return np.where(np.asarray(x, dtype=float) >= 0.0, 1.0, 0.0)

    def smoothed(self, x, s, m_max: int, quad_order: int = 64) -> np.ndarray:
        x, s = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(s, dtype=float))
        z0 = -x / np.sqrt(s)
        out = np.empty((m_max + 1,) + x.shape)
        out[0] = ndtr(-z0)
        if m_max >= 1:
            # int_{z0}^inf H_m phi = phi(z0) H_{m-1}(z0) / sqrt(m)
            h = hermite_table(m_max - 1, z0)
            scale = 1.0 / np.sqrt(np.arange(1, m_max + 1, dtype=float))
            out[1:] = _phi(z0) * h * scale.reshape((-1,) + (1,) * x.ndim)
        return out

    def derivative(self, x, m: int):
        return self(x) if m == 0 else None

    def second_moment(self, T: float) -> float:
        return 0.5


class Call(Payoff):
    """Call payoff (x - K)^+ on the Brownian level itself."""

    regular_order = 1

    def __init__(self, strike: float):
        self.strike = float(strike)
        self.name = f"call:{strike:g}"
        self.kinks = (self.strike,)

    def __call__(self, x):
        return np.maximum(np.asarray(x, dtype=float) - self.strike, 0.0)

    def smoothed(self, x, s, m_max: int, quad_order: int = 64) -> np.ndarray:
        x, s = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(s, dtype=float))
        sd = np.sqrt(s)
        z0 = (self.strike - x) / sd
        out = np.empty((m_max + 1,) + x.shape)
        out[0] = (x - self.strike) * ndtr(-z0) + sd * _phi(z0)
        if m_max >= 1:
            # one integration by parts reduces H_m against the ramp to
            # sqrt(s/m) times the indicator moment of order m-1
            tail = np.empty((m_max,) + x.shape)
            tail[0] = ndtr(-z0)
            if m_max >= 2:
                h = hermite_table(m_max - 2, z0)
                scale = 1.0 / np.sqrt(np.arange(1, m_max, dtype=float))
                tail[1:] = _phi(z0) * h * scale.reshape((-1,) + (1,) * x.ndim)
            m = np.arange(1, m_max + 1, dtype=float).reshape((-1,) + (1,) * x.ndim)
            out[1:] = sd / np.sqrt(m) * tail
        return out

    def derivative(self, x, m: int):
        if m == 0:
            return self(x)
        if m == 1:
            return np.where(np.asarray(x, dtype=float) >= self.strike, 1.0, 0.0)
        return None

    def second_moment(self, T: float) -> float:
        sd = math.sqrt(T)
        k = self.strike / sd
        return (T + self.strike**2) * float(ndtr(-k)) - self.strike * sd * float(_phi(k))


class Power(Payoff):
    """Monomial x^p for a non-negative integer p."""

    def __init__(self, p: int):
        if int(p) != p or p < 0:
            raise PayoffGrammarError(f"power exponent must be a non-negative integer, got {p}")
        self.p = int(p)
        self.name = f"power:{self.p}"

    def __call__(self, x):
        return np.power(np.asarray(x, dtype=float), self.p)

    @staticmethod
    def _gaussian_moments(x, s, q_max: int) -> np.ndarray:
        # E[(x + sqrt(s) Z)^q] for q = 0..q_max via the Hermite-type recurrence
        # mu_{q+1} = x mu_q + q s mu_{q-1}
        out = np.empty((q_max + 1,) + x.shape)
        out[0] = 1.0
        if q_max >= 1:
            out[1] = x
        for q in range(1, q_max):
            out[q + 1] = x * out[q] + q * s * out[q - 1]
        return out

    def smoothed(self, x, s, m_max: int, quad_order: int = 64) -> np.ndarray:
        x, s = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(s, dtype=float))
        p = self.p
        mom = self._gaussian_moments(x, s, p)
        out = np.zeros((m_max + 1,) + x.shape)
        for m in range(min(m_max, p) + 1):
            falling = math.perm(p, m)
            out[m] = s ** (0.5 * m) / math.sqrt(math.factorial(m)) * falling * mom[p - m]
        return out

    def derivative(self, x, m: int):
        if m > self.p:
            return np.zeros_like(np.asarray(x, dtype=float))
        return math.perm(self.p, m) * np.power(np.asarray(x, dtype=float), self.p - m)

    def second_moment(self, T: float) -> float:
        if self.p == 0:
            return 1.0
        return float(factorial2(2 * self.p - 1, exact=True)) * T**self.p


class Sine(Payoff):
    """x -> sin(x)."""

    name = "sin"

    def __call__(self, x):
        return np.sin(np.asarray(x, dtype=float))

    @staticmethod
    def _shifted(x, m: int):
        # sin(x + m pi / 2) without rounding in the phase
        r = m % 4
        return (np.sin(x), np.cos(x), -np.sin(x), -np.cos(x))[r]

    def smoothed(self, x, s, m_max: int, quad_order: int = 64) -> np.ndarray:
        x, s = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(s, dtype=float))
        out = np.empty((m_max + 1,) + x.shape)
        lsf = _log_sqrt_factorials(m_max)
        with np.errstate(divide="ignore"):
            log_sd = 0.5 * np.log(s)
        for m in range(m_max + 1):
            # e^{-s/2} s^{m/2} / sqrt(m!) in log space to survive large m
            mag = np.exp(-0.5 * s + m * log_sd - lsf[m]) if m else np.exp(-0.5 * s)
            out[m] = mag * self._shifted(x, m)
        return out

    def derivative(self, x, m: int):
        return self._shifted(np.asarray(x, dtype=float), m)

    def second_moment(self, T: float) -> float:
        return 0.5 * (1.0 - math.exp(-2.0 * T))


class CallablePayoff(Payoff):
    """Wraps an arbitrary vectorized function; moments come from quadrature."""

    def __init__(self, func: Callable[[np.ndarray], np.ndarray], name: str = "callable",
                 derivatives: dict[int, Callable] | None = None):
        self.func = func
        self.name = name
        self._derivatives = dict(derivatives or {})

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def derivative(self, x, m: int):
        if m == 0:
            return self(x)
        f = self._derivatives.get(m)
        return None if f is None else np.asarray(f(np.asarray(x, dtype=float)), dtype=float)

    def is_regular(self, m: int) -> bool:
        return m == 0 or m in self._derivatives


_GRAMMAR = re.compile(r"^\s*(heaviside|sin|call:(?P<K>[^:]+)|power:(?P<p>[^:]+))\s*$")


def parse_payoff(text: str) -> Payoff:
    """
    Parse a descriptor ``heaviside | call:<K> | power:<p> | sin``.

    >>> parse_payoff("power:2").p
    2
    """
    match = _GRAMMAR.match(text or "")
    if match is None:
        raise PayoffGrammarError(
            f"unknown payoff {text!r}; expected heaviside | call:<K> | power:<p> | sin"
        )
    head = match.group(1)
    if head == "heaviside":
        return Heaviside()
    if head == "sin":
        return Sine()
    try:
        if match.group("K") is not None:
            strike = float(match.group("K"))
            if not math.isfinite(strike):
                raise ValueError
            return Call(strike)
        p = float(match.group("p"))
    except ValueError:
        raise PayoffGrammarError(f"bad numeric argument in payoff {text!r}") from None
    return Power(int(p)) if p == int(p) else Power(p)
