import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaoskit.asymptotics import (
    alpha_index,
    default_n_max,
    error_rate,
    fdp_index,
    heaviside_tail_bound,
    occupation_A,
    occupation_alpha,
    occupation_error_norm,
    occupation_rate,
    rate_fit,
    z_bound,
    z_nk,
    z_table,
)
from chaoskit.clark_ocone import error_norm_from_spectrum
from chaoskit.functionals import build_additive, coeffs_1d, heaviside_coeffs, occupation, terminal_spectrum
from chaoskit.hermite import hermite_eval
from chaoskit.payoffs import Heaviside, Power, Sine
from chaoskit.space import TimeGrid


def z_oracle(N, k, T=1):
    # literal double sum in rationals, with t_0^0 = 1
    T = Fraction(T)
    dt = T / N
    t = [dt * i for i in range(N + 1)]

    def powr(x, e):
        return Fraction(1) if e == 0 else x**e

    total = Fraction(0)
    for l in range(1, N + 1):
        inner = sum(dt / float(t[i]) ** (k / 2) for i in range(l, N + 1))
        bracket = powr(t[l], k) - powr(t[l - 1], k) - k * dt * powr(t[l - 1], k - 1)
        total += Fraction(inner) ** 2 * bracket
    return float(total)


# ------------------------------------------------------------------ Z_{N,k}

def test_z_examples():
    assert z_nk(1, 2, 1.0) == pytest.approx(1.0, rel=1e-15)
    assert z_nk(2, 2, 1.0) == pytest.approx(0.625, rel=1e-15)


@pytest.mark.parametrize("N", [1, 2, 3, 5, 9])
@pytest.mark.parametrize("k", [2, 3, 4, 7, 12])
def test_z_against_literal_sum(N, k):
    assert z_nk(N, k, 1.0) == pytest.approx(z_oracle(N, k), rel=1e-12)


def test_z_bound_and_sign():
    ks = np.arange(2, 51)
    for T in (0.5, 1.0, 2.0):
        for N in (3, 4, 6, 8, 16, 64, 256, 1024):
            z = z_nk(N, ks, T)
            assert np.all(z >= 0)
            assert np.all(z <= 9 * T * T / N)


@settings(max_examples=40)
@given(st.integers(1, 200), st.integers(2, 60), st.floats(0.1, 5), st.floats(0.1, 10))
def test_z_scaling(N, k, T, c):
    assert z_nk(N, k, c * T) == pytest.approx(c * c * z_nk(N, k, T), rel=1e-12)


def test_z_small_N_bound_and_table():
    for N in (1, 2):
        assert max(z_nk(N, np.arange(2, 40))) <= z_bound(N)
    rows = z_table([4, 8], [2, 3])
    assert [r[:2] for r in rows] == [(4, 2), (4, 3), (8, 2), (8, 3)]
    assert all(r[2] <= r[3] for r in rows)
    with pytest.raises(ValueError):
        z_nk(4, 1)


# ------------------------------------------------------------- occupation

def test_occupation_examples():
    e = occupation_error_norm(1, 1.0, 3)
    assert e.value == pytest.approx(0.5 / (6 * math.pi), rel=1e-14)
    assert e.value == pytest.approx(0.0265258, abs=5e-8)
    assert hermite_eval(1, 0.0) == 0.0            # k = 2 term vanishes
    with pytest.raises(ValueError):
        occupation_error_norm(4, 1.0, 2)


def test_occupation_scaled_bounded():
    vals = [N * occupation_error_norm(N, 1.0, 2001).value for N in 2 ** np.arange(2, 11)]
    assert max(vals) / min(vals) < 4


def test_heaviside_tail_bound_is_rigorous():
    a = heaviside_coeffs(20001)
    for k_max in (3, 10, 101, 2001):
        tail = math.fsum(a.a[k_max + 1:] ** 2)
        assert tail <= heaviside_tail_bound(k_max)
        assert heaviside_tail_bound(k_max) <= 10 * (tail + 0.5 - math.fsum(a.a**2))
    # monotonicity used by the bound
    k = np.arange(3, 20001, 2)
    r = a.a[k] ** 2 * k**1.5
    assert np.all(np.diff(r) < 0)


@pytest.mark.parametrize("N", [2, 3])
def test_occupation_consistency_matched(N):
    x = build_additive(occupation(), TimeGrid(N, 1.0), 24)
    got = occupation_error_norm(N, 1.0, 24).value
    assert got == pytest.approx(error_norm_from_spectrum(x, 1), rel=1e-12)


@pytest.mark.parametrize("N", [2, 3])
def test_occupation_consistency_literal(N):
    # as stated: k_max = 400 against a degree-24 spectrum, 1e-6 relative
    x = build_additive(occupation(), TimeGrid(N, 1.0), 24)
    got = occupation_error_norm(N, 1.0, 400).value
    assert got == pytest.approx(error_norm_from_spectrum(x, 1), rel=1e-6)


# ------------------------------------------------------------------ alpha

@given(st.integers(1, 50), st.integers(2, 12), st.floats(0.01, 100))
def test_alpha_constant(N, n, c):
    assert alpha_index(np.full(N, c), n) == pytest.approx(1.0, rel=1e-12)


def test_alpha_examples():
    assert alpha_index(np.zeros(5), 3) == 0.0
    s = 1 + 2**-1.5
    ref = 8 * s**2 / (s**2 + 7 * 2**-3)
    assert ref == pytest.approx(5.414, abs=5e-4)
    assert alpha_index(occupation_A(2, 3), 3) == pytest.approx(ref, rel=1e-13)
    assert occupation_alpha(2, 3) == pytest.approx(ref, rel=1e-13)
    with pytest.raises(ValueError):
        alpha_index([1.0, -1.0], 3)
    with pytest.raises(ValueError):
        alpha_index([1.0], 1)


def test_alpha_even_degree_forms():
    # literal A vanishes for even n, the cancelled form does not
    assert alpha_index(occupation_A(8, 2), 2) == 0.0
    assert alpha_index(occupation_A(8, 2, cancelled=True), 2) > 0
    assert occupation_alpha(8, 2) == pytest.approx(alpha_index(occupation_A(8, 2, True), 2), rel=1e-12)


@pytest.mark.parametrize("N", [16, 32, 64, 128])
def test_alpha_growth(N):
    assert occupation_alpha(2 * N, 5) / occupation_alpha(N, 5) >= 4


@pytest.mark.parametrize("N", [1, 2, 3, 7, 40])
@pytest.mark.parametrize("n", [3, 5, 6])
def test_scaled_alpha_matches_literal(N, n):
    assert occupation_alpha(N, n) == pytest.approx(alpha_index(occupation_A(N, n, True), n), rel=1e-11)


@pytest.mark.parametrize("F", [Sine(), Power(4), Heaviside()])
@pytest.mark.parametrize("N", [1, 2, 3])
def test_fdp_terminal_is_one(F, N):
    x = terminal_spectrum(coeffs_1d(F, 1.0, 6), TimeGrid(N, 1.0))
    for n in (3, 4):
        if abs(coeffs_1d(F, 1.0, 6).a[n]) > 0:
            assert fdp_index(x, n) <= 1 + 1e-12
            assert fdp_index(x, n) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("N", [2, 3])
def test_fdp_additive_matches_alpha(N):
    x = build_additive(occupation(), TimeGrid(N, 1.0), 7)
    for n in (3, 5, 7):
        assert fdp_index(x, n) == pytest.approx(occupation_alpha(N, n), rel=1e-10)


# ------------------------------------------------------------ rate fitting

def test_rate_fit_examples():
    r = rate_fit([(N, 4 / N) for N in (2, 4, 8)])
    assert r.slope == pytest.approx(-0.5, abs=1e-14)
    assert r.max_residual < 1e-14
    assert rate_fit([(N, 3.0) for N in (2, 4, 8, 16)]).slope == pytest.approx(0.0, abs=1e-14)
    a = coeffs_1d(Power(2), 1.0, 2)
    r = error_rate(lambda N: a, range(2, 65))
    assert r.slope == pytest.approx(-0.5, abs=1e-12)
    assert r.full_slope == pytest.approx(-0.5, abs=1e-12)
    assert all(p[1] == pytest.approx(2 / p[0], rel=1e-12) for p in r.points)


def test_rate_fit_uses_largest_half():
    pts = [(2, 1.0), (4, 1.0)] + [(N, 1 / N) for N in (8, 16, 32, 64)]
    r = rate_fit(pts)
    assert r.fit_from == 16
    assert r.slope == pytest.approx(-0.5, abs=1e-13)
    assert r.full_slope != pytest.approx(-0.5, abs=1e-3)


@pytest.mark.parametrize("pts", [
    [(2, 1.0), (4, 0.5)],
    [(2, 1.0), (2, 0.5), (4, 0.1)],
    [(2, 1.0), (4, 0.0), (8, 0.1)],
])
def test_rate_fit_errors(pts):
    with pytest.raises(ValueError):
        rate_fit(pts)


def test_rate_report_sorted():
    r = rate_fit([(8, 0.1), (2, 0.4), (4, 0.2)])
    assert [p[0] for p in r.points] == [2, 4, 8]


def test_default_n_max():
    assert default_n_max(Power(3), 100) == 3
    assert default_n_max(Sine(), 100) == 80
    assert default_n_max(Heaviside(), 1024) == 40960


def test_occupation_rate_slope():
    r = occupation_rate([4, 8, 16, 32, 64, 128])
    assert -0.6 < r.slope < -0.4
    assert all(p[2] >= 0 for p in r.points)
