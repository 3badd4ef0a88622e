"""Sigmoid calculus and the combinatorics behind high-order Weight Maximization.

All functions are pure. Integer and rational tables are built once and cached;
conversion to floating point happens only at the public boundary.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import expit, log_expit

from .exceptions import BoundsError

P_MAX = 16

__all__ = [
    "P_MAX",
    "sigmoid",
    "log_sigmoid",
    "sigmoid_derivative",
    "eulerian_number",
    "bernoulli_number",
    "integer_partitions",
    "composite_tf",
    "composite_tf_sequence",
    "taylor_error_sigmoid",
]


def sigmoid(x):
    """Logistic function ``1 / (1 + exp(-x))``, elementwise and overflow-safe."""
    return expit(x)


def log_sigmoid(x):
    """``log(sigmoid(x))`` without cancellation for large ``|x|``."""
    return log_expit(x)


@lru_cache(maxsize=None)
def _eulerian_row(n: int) -> tuple[int, ...]:
    if n == 0:
        return (1,)
    prev = _eulerian_row(n - 1)
    row = []
    for k in range(n):
        left = (k + 1) * prev[k] if k < len(prev) else 0
        right = (n - k) * prev[k - 1] if k >= 1 else 0
        row.append(left + right)
    return tuple(row)


def eulerian_number(n: int, k: int) -> int:
    """Eulerian number A(n, k): permutations of ``n`` items with ``k`` ascents.

    Uses ``A(n, k) = (k+1) A(n-1, k) + (n-k) A(n-1, k-1)`` in exact integers.
    """
    if n < 1 or not 0 <= k <= n - 1:
        raise BoundsError(f"eulerian_number requires n >= 1 and 0 <= k <= n-1, got ({n}, {k})")
    return _eulerian_row(n)[k]


@lru_cache(maxsize=None)
def _bernoulli_table(n_max: int) -> tuple[Fraction, ...]:
    # sum_{j=0}^{m} C(m+1, j) B_j = 0 for m >= 1, so B_1 = -1/2.
    table = [Fraction(1)]
    for m in range(1, n_max + 1):
        acc = sum(math.comb(m + 1, j) * table[j] for j in range(m))
        table.append(-acc / (m + 1))
    return tuple(table)


def bernoulli_number(n: int, exact: bool = False):
    """Bernoulli number ``B_n`` (convention ``B_1 = -1/2``).

    Returned as a float unless ``exact=True``, in which case a
    :class:`fractions.Fraction` is returned.
    """
    if n < 0 or n > P_MAX + 1:
        raise BoundsError(f"bernoulli_number supports 0 <= n <= {P_MAX + 1}, got {n}")
    value = _bernoulli_table(P_MAX + 1)[n]
    return value if exact else float(value)


def sigmoid_derivative(p: int, x, p_max: int = P_MAX):
    """``p``-th derivative of the sigmoid at ``x`` (scalar or array).

    Closed form in powers of ``s = sigmoid(x)``::

        sum_{k=1}^{p} (-1)^(k-1) A(p, k-1) s^k (1-s)^(p+1-k)

    ``p = 0`` returns the sigmoid itself.
    """
    if p < 0 or p > p_max:
        raise BoundsError(f"derivative order must lie in [0, {p_max}], got {p}")
    s = sigmoid(x)
    if p == 0:
        return s
    one_minus = 1.0 - s
    row = _eulerian_row(p)
    out = 0.0
    for k in range(1, p + 1):
        sign = 1.0 if k % 2 == 1 else -1.0
        out = out + sign * row[k - 1] * s**k * one_minus ** (p + 1 - k)
    return out


@lru_cache(maxsize=None)
def _partitions(k: int) -> tuple[tuple[int, ...], ...]:
    found = []

    def rec(remaining: int, largest: int, counts: list[int]) -> None:
        if remaining == 0:
            found.append(tuple(counts))
            return
        for part in range(min(remaining, largest), 0, -1):
            counts[part - 1] += 1
            rec(remaining - part, part, counts)
            counts[part - 1] -= 1

    rec(k, k, [0] * k)
    return tuple(found)


def integer_partitions(k: int) -> list[tuple[int, ...]]:
    """Partitions of ``k`` in multiplicity encoding.

    Entry ``j`` (0-based) of each tuple counts the parts equal to ``j + 1``,
    so ``2 + 1 + 1`` becomes ``(2, 1, 0, 0)``.
    """
    if k < 1 or k > P_MAX:
        raise BoundsError(f"integer_partitions supports 1 <= k <= {P_MAX}, got {k}")
    return list(_partitions(k))


def composite_tf(k: int, t: Sequence):
    """Complete exponential Bell polynomial ``B_k(t[0], ..., t[k-1])``.

    Evaluated as the sum over partitions of ``k``::

        sum_{i in P(k)} k! / prod_j (i_j! (j!)^{i_j}) * prod_j t_j^{i_j}

    Entries of ``t`` may be scalars or equally shaped arrays. ``k = 0`` gives 1.
    """
    if k < 0:
        raise BoundsError(f"composite_tf requires k >= 0, got {k}")
    if k == 0:
        return 1.0
    if len(t) < k:
        raise BoundsError(f"composite_tf({k}) needs at least {k} terms, got {len(t)}")
    total = 0.0
    for counts in integer_partitions(k):
        denom = 1
        for j, c in enumerate(counts, start=1):
            denom *= math.factorial(c) * math.factorial(j) ** c
        term = math.factorial(k) / denom
        for j, c in enumerate(counts):
            if c:
                term = term * np.asarray(t[j]) ** c
        total = total + term
    return total


def composite_tf_sequence(t: Sequence, k_max: int) -> list:
    """All of ``B_0 .. B_{k_max}`` via ``B_k = sum_j C(k-1, j-1) t_j B_{k-j}``."""
    if k_max < 0:
        raise BoundsError(f"k_max must be non-negative, got {k_max}")
    if len(t) < k_max:
        raise BoundsError(f"need at least {k_max} terms, got {len(t)}")
    ones = np.ones_like(np.asarray(t[0], dtype=float)) if k_max else 1.0
    out = [ones]
    for k in range(1, k_max + 1):
        acc = 0.0
        for j in range(1, k + 1):
            acc = acc + math.comb(k - 1, j - 1) * t[j - 1] * out[k - j]
        out.append(acc)
    return out


def taylor_error_sigmoid(p: int, x):
    """Absolute error of the order-``p`` Maclaurin polynomial of the sigmoid at ``x``."""
    if p < 0 or p > P_MAX:
        raise BoundsError(f"order must lie in [0, {P_MAX}], got {p}")
    x = np.asarray(x, dtype=float)
    approx = 0.0
    for k in range(p + 1):
        approx = approx + float(sigmoid_derivative(k, 0.0)) * x**k / math.factorial(k)
    err = np.abs(sigmoid(x) - approx)
    return float(err) if err.ndim == 0 else err
