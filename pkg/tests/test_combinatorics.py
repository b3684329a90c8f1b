from __future__ import annotations

import math
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shadowham.combinatorics import (
    backseat_bound,
    backseat_log_rate,
    backseat_sum,
    bernoulli,
    bernoulli_from_stirling,
    block_words,
    fubini,
    fubini_egf_partial,
    lemma1_lhs,
    lemma1_rhs,
    quadratic_ipb_bound_check,
    quartic_alternating_ipb,
    quartic_growth_formula,
    stirling2,
)


def set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def test_stirling_by_enumeration():
    counts = {}
    for part in set_partitions(list(range(6))):
        counts[len(part)] = counts.get(len(part), 0) + 1
    assert all(stirling2(6, n) == c for n, c in counts.items())
    assert stirling2(3, 2) == 3
    assert stirling2(0, 0) == 1 and stirling2(4, 0) == 0 and stirling2(2, 5) == 0


def test_fubini_by_enumeration():
    # ordered set partitions: every set partition with its blocks permuted
    for n in range(1, 6):
        brute = sum(math.factorial(len(p)) for p in set_partitions(list(range(n))))
        assert fubini(n) == brute
    assert [fubini(n) for n in range(6)] == [1, 1, 3, 13, 75, 541]


def test_bernoulli_values():
    assert [bernoulli(n) for n in range(5)] == [1, Fraction(-1, 2), Fraction(1, 6), 0, Fraction(-1, 30)]
    assert bernoulli(12) == Fraction(-691, 2730)
    for n in range(25):
        assert bernoulli(n) == bernoulli_from_stirling(n)


def test_block_words_by_brute_force():
    k, n = 4, 2
    brute = [w for w in product(range(k + 1), repeat=2 * n)
             if sum(w) == k and all(w[2 * i] + w[2 * i + 1] > 0 for i in range(n))]
    assert sorted(block_words(k, n)) == sorted(brute)


@pytest.mark.parametrize("k", range(1, 11))
def test_lemma1_identity(k):
    for n in range(1, k + 1):
        assert lemma1_lhs(k, n) == lemma1_rhs(k, n)


def test_lemma1_domain():
    with pytest.raises(ValueError):
        lemma1_lhs(3, 4)


@pytest.mark.parametrize("k", range(1, 21))
def test_fubini_bound(k):
    # exact comparison a_{k-1} (log 2)^k < (k-1)!, rational bound on log 2 from above
    assert fubini(k - 1) < math.factorial(k - 1) / math.log(2) ** k


def test_fubini_egf():
    x = 0.3
    assert fubini_egf_partial(x, terms=80) == pytest.approx(1.0 / (2.0 - math.exp(x)), rel=1e-14)
    assert fubini_egf_partial(0.0) == 1.0


@pytest.mark.parametrize("r", [0.5, 2.0, 10.0])
def test_backseat_bound(r):
    for k in range(1, 201):
        assert backseat_sum(k, r) <= backseat_bound(k, r)


def test_backseat_small_case():
    # k = 2, r = 1: n = 1 gives 4 / 1, n = 2 gives (4 / 4) (3 / 3)
    assert backseat_sum(2, 1.0) == pytest.approx(5.0)
    assert backseat_log_rate(2, 1.0) == pytest.approx(math.log(5.0) / 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.floats(0.1, 20))
def test_backseat_log_rate_consistent(k, r):
    assert backseat_log_rate(k, r) == pytest.approx(math.log(backseat_sum(k, r)) / k, rel=1e-10)


def test_quadratic_ipb_bound():
    assert quadratic_ipb_bound_check(1.0, 1.0, 8)
    assert quadratic_ipb_bound_check(0.5, 2.0, 7)


@pytest.mark.parametrize("n", range(1, 5))
def test_quartic_growth(n):
    value = quartic_alternating_ipb(n)
    assert value.denominator == 1
    # with G leading the sign alternates as (-1)^(n+1); the magnitude is the growth formula
    assert value == (-1) ** (n + 1) * quartic_growth_formula(n)
    assert abs(value) == quartic_growth_formula(n)
