"""Exact combinatorial primitives: Stirling, Fubini and Bernoulli numbers,
the block-composition identity and the backseat sum with its growth bound.

Everything except the backseat sum is exact integer or rational arithmetic.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Iterator

__all__ = [
    "stirling2",
    "fubini",
    "bernoulli",
    "bernoulli_from_stirling",
    "block_words",
    "lemma1_lhs",
    "lemma1_rhs",
    "backseat_sum",
    "backseat_bound",
    "backseat_log_rate",
    "fubini_egf_partial",
    "quadratic_ipb_bound_check",
    "quartic_alternating_ipb",
    "quartic_growth_formula",
]


@lru_cache(maxsize=None)
def stirling2(k: int, n: int) -> int:
    """Stirling number of the second kind S(k, n)."""
    if k < 0 or n < 0:
        raise ValueError("stirling2 needs nonnegative arguments")
    if n > k:
        return 0
    if k == 0:
        return 1 if n == 0 else 0
    if n == 0:
        return 0
    return n * stirling2(k - 1, n) + stirling2(k - 1, n - 1)


def fubini(n: int) -> int:
    """Ordered Bell (Fubini) number a_n = sum_m m! S(n, m)."""
    if n < 0:
        raise ValueError("fubini needs n >= 0")
    return sum(math.factorial(m) * stirling2(n, m) for m in range(n + 1))


@lru_cache(maxsize=None)
def _akiyama_tanigawa(n: int) -> tuple[Fraction, ...]:
    table = [Fraction(0)] * (n + 1)
    out = []
    for m in range(n + 1):
        table[m] = Fraction(1, m + 1)
        for j in range(m, 0, -1):
            table[j - 1] = j * (table[j - 1] - table[j])
        out.append(table[0])
    return tuple(out)


def bernoulli(n: int) -> Fraction:
    """Bernoulli number B_n with the B_1 = -1/2 convention.

    Computed by the Akiyama-Tanigawa recurrence, which natively produces
    B_1 = +1/2; the sign is flipped for that single index.
    """
    if n < 0:
        raise ValueError("bernoulli needs n >= 0")
    value = _akiyama_tanigawa(n)[n]
    return -value if n == 1 else value


def bernoulli_from_stirling(n: int) -> Fraction:
    """Independent route: B_n = sum_k (-1)^k k! S(n, k) / (k + 1).

    This closed form yields the B_1 = -1/2 convention directly.
    """
    if n < 0:
        raise ValueError("bernoulli needs n >= 0")
    return sum(
        (Fraction((-1) ** k * math.factorial(k) * stirling2(n, k), k + 1) for k in range(n + 1)),
        Fraction(0),
    )


def _pairs_of_weight(w: int) -> list[tuple[int, int]]:
    return [(r, w - r) for r in range(w + 1)]


def _compositions(k: int, n: int) -> Iterator[tuple[int, ...]]:
    """Compositions of k into n positive parts."""
    if n == 1:
        if k >= 1:
            yield (k,)
        return
    for first in range(1, k - n + 2):
        for rest in _compositions(k - first, n - 1):
            yield (first,) + rest


def block_words(k: int, n: int) -> Iterator[tuple[int, ...]]:
    """All tuples (r_1, s_1, ..., r_n, s_n) with r_i + s_i > 0 and total k."""
    for comp in _compositions(k, n):
        for blocks in product(*(_pairs_of_weight(w) for w in comp)):
            yield tuple(x for pair in blocks for x in pair)


def lemma1_lhs(k: int, n: int) -> int:
    """Brute-force sum of k!/prod(r_i! s_i!) over rank-n words of weight k."""
    if not 1 <= n <= k:
        raise ValueError("need 1 <= n <= k")
    kf = math.factorial(k)
    total = 0
    for word in block_words(k, n):
        denom = 1
        for x in word:
            denom *= math.factorial(x)
        total += kf // denom
    return total


def lemma1_rhs(k: int, n: int) -> int:
    return math.factorial(n) * 2**k * stirling2(k, n)


def backseat_sum(k: int, r: float) -> float:
    """sum_{n=1}^{k} prod_{m=0}^{n-1} r (k^2 - m^2) / (n^2 - m^2).

    Each product is accumulated in log space so that large k does not
    overflow before the final exponentiation; the result is returned as a
    float (``inf`` if it genuinely exceeds the double range).
    """
    if k < 1 or r <= 0:
        raise ValueError("need k >= 1 and r > 0")
    logs = []
    for n in range(1, k + 1):
        acc = 0.0
        for m in range(n):
            acc += math.log(r) + math.log(k * k - m * m) - math.log(n * n - m * m)
        logs.append(acc)
    top = max(logs)
    scaled = math.fsum(math.exp(v - top) for v in logs)
    total_log = top + math.log(scaled)
    if total_log > 709.0:
        return math.inf
    return math.exp(total_log)


def backseat_log_rate(k: int, r: float) -> float:
    """(1/k) log(backseat_sum(k, r)), evaluated without overflow."""
    logs = []
    for n in range(1, k + 1):
        acc = 0.0
        for m in range(n):
            acc += math.log(r) + math.log(k * k - m * m) - math.log(n * n - m * m)
        logs.append(acc)
    top = max(logs)
    return (top + math.log(math.fsum(math.exp(v - top) for v in logs))) / k


def backseat_bound(k: int, r: float) -> float:
    """k * ((2 + r + sqrt(r (4 + r))) / 2)^k."""
    if k < 1 or r <= 0:
        raise ValueError("need k >= 1 and r > 0")
    base = (2.0 + r + math.sqrt(r * (4.0 + r))) / 2.0
    log_val = math.log(k) + k * math.log(base)
    if log_val > 709.0:
        return math.inf
    return k * base**k


def fubini_egf_partial(x: float, terms: int = 16) -> float:
    """Partial sum of the exponential generating function sum a_n x^n / n!."""
    return math.fsum(fubini(n) * x**n / math.factorial(n) for n in range(terms))


def _quadratic_values(a: float, b: float) -> tuple[list[float], list[float]]:
    # derivatives of a p^2 and b q^2 at p = q = 1
    return [a, 2 * a, 2 * a], [b, 2 * b, 2 * b]


def quadratic_ipb_bound_check(a: float, b: float, max_weight: int) -> bool:
    """Every bracket word of weight <= max_weight for F = a p^2, G = b q^2,
    evaluated at (1, 1), is at most (max{4a, 4b})^weight in magnitude."""
    from itertools import product as _product

    from .mh_symbolic import ipb_letters

    if a <= 0 or b <= 0:
        raise ValueError("need a, b > 0")
    fv, gv = _quadratic_values(a, b)
    base = max(4 * a, 4 * b)
    for w in range(1, max_weight + 1):
        for letters in _product("FG", repeat=w):
            poly = ipb_letters("".join(letters))
            if poly.is_zero():
                continue
            if abs(poly.evaluate(fv + [0.0] * w, gv + [0.0] * w)) > base**w * (1 + 1e-12):
                return False
    return True


def quartic_alternating_ipb(n: int) -> Fraction:
    """The alternating bracket {G F G F ...} of weight 2n for F = p^4, G = q^4 at (1, 1)."""
    from .mh_symbolic import ipb

    if n < 1:
        raise ValueError("n must be positive")
    quartic = [Fraction(math.factorial(4), math.factorial(4 - k)) for k in range(5)]
    vals = quartic + [Fraction(0)] * (2 * n)
    poly = ipb((1,) * (2 * n), leading="G")
    total = Fraction(0)
    for mono, coeff in poly.monomials():
        term = Fraction(coeff)
        for name, e in mono.items():
            term *= vals[int(name[1:])] ** e
        total += term
    return total


def quartic_growth_formula(n: int) -> int:
    """(n + 1) (2n)! 4^(2n - 1)."""
    return (n + 1) * math.factorial(2 * n) * 4 ** (2 * n - 1)
