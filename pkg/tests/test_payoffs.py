import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from chaoskit.hermite import hermite_eval
from chaoskit.payoffs import (
    Call,
    CallablePayoff,
    Heaviside,
    Power,
    PayoffGrammarError,
    Sine,
    parse_payoff,
)


def quad_smoothed(F, x, s, m, kinks=()):
    # adaptive-quadrature oracle for E[F(x + sqrt(s) Z) H_m(Z)]
    f = lambda z: float(F(np.array(x + math.sqrt(s) * z))) * hermite_eval(m, z) \
        * math.exp(-z * z / 2) / math.sqrt(2 * math.pi)
    pts = [(k - x) / math.sqrt(s) for k in kinks]
    lo, hi = -14.0, 14.0
    pts = [p for p in pts if lo < p < hi]
    val, _ = integrate.quad(f, lo, hi, points=pts or None, limit=500, epsabs=1e-13)
    return val


@pytest.mark.parametrize("F", [Heaviside(), Call(0.4), Call(-1.0), Power(3), Sine()])
@pytest.mark.parametrize("x,s", [(0.0, 1.0), (0.3, 0.25), (-0.7, 2.0)])
def test_closed_forms_match_quadrature(F, x, s):
    got = F.smoothed(x, s, 8)
    for m in range(9):
        ref = quad_smoothed(F, x, s, m, F.kinks)
        assert got[m] == pytest.approx(ref, abs=1e-9), (F.name, m)


def test_generic_quadrature_default():
    F = CallablePayoff(lambda x: np.exp(0.3 * x), "exp")
    got = F.smoothed(0.2, 0.5, 5)
    # E[e^{c(x+sZ)} H_m(Z)] = e^{cx + c^2 s^2/2} (c s)^m / sqrt(m!)
    c, sd = 0.3, math.sqrt(0.5)
    ref = [math.exp(c * 0.2 + c * c * 0.5 / 2) * (c * sd) ** m / math.sqrt(math.factorial(m))
           for m in range(6)]
    np.testing.assert_allclose(got, ref, rtol=1e-12)


def test_broadcast_shapes():
    x = np.zeros((3, 4))
    s = np.linspace(0.1, 1, 4)
    for F in (Heaviside(), Call(0.1), Power(2), Sine()):
        assert F.smoothed(x, s, 5).shape == (6, 3, 4)


@pytest.mark.parametrize("F,T", [(Heaviside(), 1.0), (Call(0.3), 2.0), (Power(3), 1.5), (Sine(), 0.7)])
def test_second_moments(F, T):
    f = lambda w: float(F(np.array(w))) ** 2 * math.exp(-w * w / (2 * T)) / math.sqrt(2 * math.pi * T)
    ref, _ = integrate.quad(f, -40, 40, points=list(F.kinks) or None, limit=400)
    assert F.second_moment(T) == pytest.approx(ref, rel=1e-10)


def test_grammar():
    assert isinstance(parse_payoff("heaviside"), Heaviside)
    assert isinstance(parse_payoff("sin"), Sine)
    assert parse_payoff("call:1.5").strike == 1.5
    assert parse_payoff("power:3").p == 3
    for bad in ["", "put:1", "call:", "call:abc", "power:2.5", "power:-1", "call:inf", "sine"]:
        with pytest.raises(PayoffGrammarError):
            parse_payoff(bad)


@settings(max_examples=40)
@given(x=st.floats(-3, 3), s=st.floats(0.05, 4))
def test_heaviside_mean_is_probability(x, s):
    from scipy.stats import norm
    assert Heaviside().smoothed(x, s, 0)[0] == pytest.approx(norm.cdf(x / math.sqrt(s)), abs=1e-15)


@settings(max_examples=40)
@given(x=st.floats(-3, 3), s=st.floats(0.05, 4), K=st.floats(-2, 2))
def test_call_first_moment_is_scaled_probability(x, s, K):
    # E[F(x+sZ) H_1(Z)] = sqrt(s) E[F'(x + sqrt(s) Z)] = sqrt(s) P(x + sqrt(s) Z >= K)
    from scipy.stats import norm
    got = Call(K).smoothed(x, s, 1)[1]
    assert got == pytest.approx(math.sqrt(s) * norm.sf((K - x) / math.sqrt(s)), abs=1e-14)
