import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaoskit.hermite import (
    gauss_hermite_rule,
    hermite_eval,
    hermite_table,
    hermite_zero,
)


def double_factorial(n):
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def monic_hermite(n, x):
    # independent oracle: He_n from the explicit sum
    return sum(
        (-1) ** m * math.factorial(n) / (math.factorial(m) * math.factorial(n - 2 * m) * 2**m)
        * x ** (n - 2 * m)
        for m in range(n // 2 + 1)
    )


@pytest.mark.parametrize("n,x,expected", [
    (0, 7.3, 1.0),
    (1, 1.5, 1.5),
    (2, 0.0, -1 / math.sqrt(2)),
    (3, 1.0, -2 / math.sqrt(6)),
])
def test_recurrence_examples(n, x, expected):
    assert hermite_eval(n, x) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("n", range(12))
def test_matches_explicit_sum(n):
    xs = np.linspace(-3, 3, 13)
    ref = np.array([monic_hermite(n, x) for x in xs]) / math.sqrt(math.factorial(n))
    np.testing.assert_allclose(hermite_eval(n, xs), ref, rtol=1e-12, atol=1e-12)


def test_small_rules_closed_form():
    r1 = gauss_hermite_rule(1)
    assert list(r1.nodes) == [0.0] and list(r1.weights) == [1.0]
    r2 = gauss_hermite_rule(2)
    np.testing.assert_allclose(r2.nodes, [-1, 1], atol=1e-15)
    np.testing.assert_allclose(r2.weights, [0.5, 0.5], atol=1e-15)
    r3 = gauss_hermite_rule(3)
    np.testing.assert_allclose(r3.nodes, [-math.sqrt(3), 0, math.sqrt(3)], atol=1e-14)
    np.testing.assert_allclose(r3.weights, [1 / 6, 2 / 3, 1 / 6], atol=1e-15)


@pytest.mark.parametrize("order", [1, 2, 5, 16, 32, 64, 100])
def test_rule_invariants(order):
    r = gauss_hermite_rule(order)
    assert abs(math.fsum(r.weights) - 1) < 1e-12
    assert np.all(r.weights > 0)
    assert np.all(np.diff(r.nodes) > 0)
    np.testing.assert_array_equal(r.nodes, -r.nodes[::-1])


@pytest.mark.parametrize("order", [4, 10, 20])
def test_moment_exactness(order):
    r = gauss_hermite_rule(order)
    for p in range(2 * order):
        exact = double_factorial(p - 1) if p % 2 == 0 else 0.0
        got = r.expect(r.nodes**p)
        # odd moments vanish; measure against the size of the summands
        scale = max(1.0, exact, r.expect(np.abs(r.nodes) ** p))
        assert abs(got - exact) <= 1e-10 * scale, (p, got, exact)


@pytest.mark.parametrize("order", [3, 20, 64, 120])
def test_matches_numpy_hermegauss(order):
    # independent oracle: numpy's companion-matrix rule, renormalized
    x, w = np.polynomial.hermite_e.hermegauss(order)
    r = gauss_hermite_rule(order)
    np.testing.assert_allclose(r.nodes, x, rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(r.weights, w / w.sum(), rtol=1e-8, atol=1e-300)


def test_orthonormality_order_32():
    r = gauss_hermite_rule(32)
    h = hermite_table(20, r.nodes)
    gram = (h * r.weights) @ h.T
    assert np.max(np.abs(gram - np.eye(21))) < 1e-10


@pytest.mark.parametrize("n", range(1, 16))
def test_ladder_identity(n):
    x = np.linspace(-3, 3, 25)
    h = 1e-5
    fd = (hermite_eval(n, x + h) - hermite_eval(n, x - h)) / (2 * h)
    np.testing.assert_allclose(fd, math.sqrt(n) * hermite_eval(n - 1, x), atol=1e-6)


@given(n=st.integers(0, 40), x=st.floats(-8, 8, allow_nan=False))
def test_parity_exact(n, x):
    assert hermite_eval(n, -x) == (-1) ** n * hermite_eval(n, x)


def test_zero_values():
    for m in range(11):
        assert hermite_eval(2 * m + 1, 0.0) == 0.0
        v = hermite_eval(2 * m, 0.0)
        ref = double_factorial(2 * m - 1) ** 2
        assert v * v * math.factorial(2 * m) == pytest.approx(ref, rel=1e-10)


def test_hermite_zero_matches_recurrence():
    z = hermite_zero(60)
    ref = hermite_table(60, 0.0)
    np.testing.assert_allclose(z, ref, atol=1e-15)


def test_hermite_zero_large_degree_finite():
    z = hermite_zero(200_000)
    # H_{2m}(0)^2 ~ 1/sqrt(pi m)
    m = 100_000
    assert z[2 * m] ** 2 == pytest.approx(1 / math.sqrt(math.pi * m), rel=1e-5)


@settings(max_examples=30)
@given(i=st.integers(0, 15), j=st.integers(0, 15))
def test_orthonormality_property(i, j):
    r = gauss_hermite_rule(24)
    val = r.expect(hermite_eval(i, r.nodes) * hermite_eval(j, r.nodes))
    assert abs(val - (i == j)) < 1e-10


@pytest.mark.parametrize("order", [401, 600])
def test_large_rules_without_overflow(order):
    import warnings
    gauss_hermite_rule.cache_clear()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        r = gauss_hermite_rule(order)
    assert np.all(r.weights >= 0) and abs(math.fsum(r.weights) - 1) < 1e-12
    assert r.expect(r.nodes**4) == pytest.approx(3.0, rel=1e-10)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        gauss_hermite_rule(0)
    with pytest.raises(ValueError):
        hermite_eval(-1, 0.0)
