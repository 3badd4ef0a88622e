import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weightmax.exceptions import BoundsError
from weightmax.math_kernel import (
    bernoulli_number,
    composite_tf,
    composite_tf_sequence,
    eulerian_number,
    integer_partitions,
    log_sigmoid,
    sigmoid,
    sigmoid_derivative,
    taylor_error_sigmoid,
)


def test_eulerian_rows():
    assert [eulerian_number(5, k) for k in range(5)] == [1, 26, 66, 26, 1]
    assert [eulerian_number(4, k) for k in range(4)] == [1, 11, 11, 1]


@pytest.mark.parametrize("n", range(1, 12))
def test_eulerian_row_counts_permutations(n):
    assert sum(eulerian_number(n, k) for k in range(n)) == math.factorial(n)


@pytest.mark.parametrize("n,k", [(0, 0), (3, 3), (3, -1)])
def test_eulerian_out_of_range(n, k):
    with pytest.raises(BoundsError):
        eulerian_number(n, k)


def test_bernoulli_known_values():
    assert bernoulli_number(0, exact=True) == 1
    assert bernoulli_number(1, exact=True) == Fraction(-1, 2)
    assert bernoulli_number(2, exact=True) == Fraction(1, 6)
    assert bernoulli_number(4, exact=True) == Fraction(-1, 30)
    assert bernoulli_number(12, exact=True) == Fraction(-691, 2730)
    assert all(bernoulli_number(n) == 0.0 for n in range(3, 18, 2))


def test_bernoulli_bounds():
    with pytest.raises(BoundsError):
        bernoulli_number(18)
    with pytest.raises(BoundsError):
        bernoulli_number(-1)


def test_sigmoid_derivative_frozen_values():
    x = 0.7
    assert sigmoid_derivative(1, x) == pytest.approx(0.221712873293109050, rel=1e-14)
    assert sigmoid_derivative(2, x) == pytest.approx(-0.074578788440341810, rel=1e-13)
    assert sigmoid_derivative(3, x) == pytest.approx(-0.073226715810208320, rel=1e-13)
    assert sigmoid_derivative(5, x) == pytest.approx(0.054853002736231217, rel=1e-12)


def test_sigmoid_derivative_order_zero_and_max():
    x = np.linspace(-3, 3, 7)
    np.testing.assert_array_equal(sigmoid_derivative(0, x), sigmoid(x))
    assert sigmoid_derivative(1, 0.0) == 0.25
    with pytest.raises(BoundsError):
        sigmoid_derivative(17, 0.0)
    with pytest.raises(BoundsError):
        sigmoid_derivative(4, 0.0, p_max=3)


@settings(max_examples=50, deadline=None)
@given(st.floats(-8, 8), st.integers(1, 12))
def test_sigmoid_derivative_parity(x, p):
    # sigma(x) - 1/2 is odd, so sigma^(p) is even for odd p and odd for even p
    sign = 1.0 if p % 2 == 1 else -1.0
    assert sigmoid_derivative(p, -x) == pytest.approx(sign * sigmoid_derivative(p, x), abs=1e-12)


def test_log_sigmoid_tails():
    x = np.array([-800.0, -30.0, 0.0, 30.0, 800.0])
    out = log_sigmoid(x)
    assert np.all(np.isfinite(out))
    assert out[0] == pytest.approx(-800.0)
    assert out[2] == pytest.approx(-math.log(2.0))


def test_partitions_of_four():
    parts = integer_partitions(4)
    assert len(parts) == 5
    assert (4, 0, 0, 0) in parts and (0, 0, 0, 1) in parts and (2, 1, 0, 0) in parts
    assert all(sum((j + 1) * c for j, c in enumerate(p)) == 4 for p in parts)


@pytest.mark.parametrize("k,count", [(1, 1), (5, 7), (10, 42), (16, 231)])
def test_partition_counts(k, count):
    assert len(integer_partitions(k)) == count


def test_composite_tf_small_orders():
    t = [2.0, 3.0, 5.0, 7.0]
    assert composite_tf(0, t) == 1.0
    assert composite_tf(1, t) == 2.0
    assert composite_tf(2, t) == 2.0**2 + 3.0
    assert composite_tf(3, t) == 2.0**3 + 3 * 2.0 * 3.0 + 5.0
    assert composite_tf(4, t) == 2.0**4 + 6 * 2.0**2 * 3.0 + 4 * 2.0 * 5.0 + 3 * 3.0**2 + 7.0


def test_composite_tf_is_exp_derivative():
    # B_k(g', g'', ...) e^g equals d^k/dx^k e^g; with g = x^2 at x = 1: derivatives 2, 2, 0, ...
    t = [2.0, 2.0] + [0.0] * 4
    # d^k/dx^k exp(x^2) at 1 divided by e: 1, 2, 6, 20, 76, 312, 1384
    expected = [1, 2, 6, 20, 76, 312, 1384]
    assert [composite_tf(k, t) for k in range(7)] == pytest.approx(expected)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=8, max_size=8))
def test_recurrence_matches_partition_sum(t):
    seq = composite_tf_sequence(t, 8)
    for k in range(9):
        assert seq[k] == pytest.approx(composite_tf(k, t), rel=1e-9, abs=1e-9)


def test_composite_tf_sequence_broadcasts():
    t = [np.array([1.0, 2.0]), np.array([0.5, 0.0])]
    seq = composite_tf_sequence(t, 2)
    np.testing.assert_allclose(seq[2], [1.5, 4.0])
    assert composite_tf_sequence([], 0) == [1.0]


def test_taylor_error_frozen_and_growth():
    assert taylor_error_sigmoid(4, 4.0) == pytest.approx(0.815347123371241775, rel=1e-12)
    assert taylor_error_sigmoid(6, 0.0) == 0.0
    small = [taylor_error_sigmoid(p, 1.0) for p in (1, 3, 5, 7)]
    assert small == sorted(small, reverse=True)
