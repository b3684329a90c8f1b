"""Exact term algebra for the one-dimensional modified Hamiltonian.

A :class:`TermPoly` is a polynomial with rational coefficients in the
abstract derivative symbols ``f_k = F^(k)(p)`` and ``g_k = G^(k)(q)``.
Poisson brackets, iterated brackets, the BCH corrections ``H_n`` and the
frozen-coefficient Taylor coefficients ``C_{j,k}`` are all built on it.

Monomials are stored packed into a single Python integer: the exponent of
each symbol occupies one byte-sized field.  Multiplying monomials is then a
single integer addition, which keeps the inner loops of the Taylor-coefficient
computation cheap.  The packing is an internal detail; the public surface
speaks in ``{symbol: exponent}`` mappings.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

from .combinatorics import bernoulli, block_words
from .core import OracleOrderExceeded

__all__ = [
    "TermPoly",
    "BracketWord",
    "f",
    "g",
    "diff_p",
    "diff_q",
    "poisson",
    "ipb",
    "ipb_letters",
    "bch_correction",
    "dynkin_correction",
    "omega_coefficient",
    "omega_coefficients",
    "cancellation_check",
    "CancellationResult",
    "phi_bound",
    "phi_terms",
    "truncated_mh_eval",
    "general_d_truncation_eval",
    "OracleOrderExceeded",
    "dump_correction",
]

_BITS = 8
_FIELD = (1 << _BITS) - 1
_NSYM = 48  # derivative orders 0..47 for each of f and g
_G_OFFSET = _NSYM * _BITS
_F_MASK = (1 << _G_OFFSET) - 1


def _unit(family: str, k: int) -> int:
    if not 0 <= k < _NSYM:
        raise ValueError(f"derivative order {k} outside the supported range 0..{_NSYM - 1}")
    shift = k * _BITS if family == "f" else _G_OFFSET + k * _BITS
    return 1 << shift


def _unpack(key: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Return exponent tuples (f exponents, g exponents), trailing zeros removed."""
    fpart, gpart = key & _F_MASK, key >> _G_OFFSET
    fexp: list[int] = []
    while fpart:
        fexp.append(fpart & _FIELD)
        fpart >>= _BITS
    gexp: list[int] = []
    while gpart:
        gexp.append(gpart & _FIELD)
        gpart >>= _BITS
    return tuple(fexp), tuple(gexp)


def _pack(fexp: Sequence[int], gexp: Sequence[int]) -> int:
    key = 0
    for k, e in enumerate(fexp):
        if e:
            key += e << (k * _BITS)
    for k, e in enumerate(gexp):
        if e:
            key += e << (_G_OFFSET + k * _BITS)
    return key


class TermPoly:
    """Immutable exact polynomial in the symbols f_k and g_k."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[int, Fraction] | None = None, *, _trusted: bool = False):
        if terms is None:
            self._terms: dict[int, Fraction] = {}
        elif _trusted:
            self._terms = dict(terms)
        else:
            self._terms = {k: Fraction(v) for k, v in terms.items() if v != 0}
        self._hash: int | None = None

    # construction -----------------------------------------------------
    @classmethod
    def constant(cls, c) -> "TermPoly":
        c = Fraction(c)
        return cls({0: c} if c else {}, _trusted=True)

    @classmethod
    def symbol(cls, family: str, k: int) -> "TermPoly":
        if family not in ("f", "g"):
            raise ValueError("family must be 'f' or 'g'")
        return cls({_unit(family, k): Fraction(1)}, _trusted=True)

    @classmethod
    def from_monomials(cls, items: Iterable[tuple[Mapping[str, int], object]]) -> "TermPoly":
        """Build from ``({"f1": 2, "g0": 1}, coeff)`` pairs."""
        acc: dict[int, Fraction] = {}
        for mono, coeff in items:
            key = 0
            for name, e in mono.items():
                if e < 0 or e > _FIELD:
                    raise ValueError(f"exponent {e} out of range")
                key += e * _unit(name[0], int(name[1:]))
            acc[key] = acc.get(key, Fraction(0)) + Fraction(coeff)
        return cls({k: v for k, v in acc.items() if v}, _trusted=True)

    # inspection -------------------------------------------------------
    @property
    def terms(self) -> dict[int, Fraction]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def monomials(self) -> list[tuple[dict[str, int], Fraction]]:
        """Sorted list of ``({symbol: exponent}, coefficient)`` pairs."""
        out = []
        for key in sorted(self._terms, key=_sort_key):
            fexp, gexp = _unpack(key)
            mono = {f"f{k}": e for k, e in enumerate(fexp) if e}
            mono.update({f"g{k}": e for k, e in enumerate(gexp) if e})
            out.append((mono, self._terms[key]))
        return out

    def l1(self) -> Fraction:
        """Sum of absolute values of the coefficients."""
        return sum((abs(c) for c in self._terms.values()), Fraction(0))

    def max_order(self) -> int:
        """Highest derivative order appearing in any symbol (-1 for constants)."""
        best = -1
        for key in self._terms:
            fexp, gexp = _unpack(key)
            best = max(best, len(fexp) - 1, len(gexp) - 1)
        return best

    # arithmetic -------------------------------------------------------
    def __add__(self, other) -> "TermPoly":
        if not isinstance(other, TermPoly):
            other = TermPoly.constant(other)
        if len(other._terms) > len(self._terms):
            self, other = other, self
        acc = dict(self._terms)
        for k, v in other._terms.items():
            s = acc.get(k)
            if s is None:
                acc[k] = v
            else:
                s += v
                if s:
                    acc[k] = s
                else:
                    del acc[k]
        return TermPoly(acc, _trusted=True)

    __radd__ = __add__

    def __neg__(self) -> "TermPoly":
        return TermPoly({k: -v for k, v in self._terms.items()}, _trusted=True)

    def __sub__(self, other) -> "TermPoly":
        if not isinstance(other, TermPoly):
            other = TermPoly.constant(other)
        return self + (-other)

    def __rsub__(self, other) -> "TermPoly":
        return (-self) + other

    def scale(self, c) -> "TermPoly":
        c = Fraction(c)
        if not c:
            return TermPoly()
        return TermPoly({k: v * c for k, v in self._terms.items()}, _trusted=True)

    def __mul__(self, other) -> "TermPoly":
        if not isinstance(other, TermPoly):
            return self.scale(other)
        acc: dict[int, Fraction] = {}
        get = acc.get
        for k1, v1 in self._terms.items():
            for k2, v2 in other._terms.items():
                k = k1 + k2
                acc[k] = get(k, 0) + v1 * v2
        return TermPoly({k: v for k, v in acc.items() if v}, _trusted=True)

    def __rmul__(self, other) -> "TermPoly":
        return self.scale(other)

    def __pow__(self, n: int) -> "TermPoly":
        if n < 0:
            raise ValueError("negative powers are not polynomials")
        out = TermPoly.constant(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, TermPoly):
            if isinstance(other, (int, Fraction)):
                other = TermPoly.constant(other)
            else:
                return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    # calculus -----------------------------------------------------------
    def diff(self, family: str) -> "TermPoly":
        acc: dict[int, Fraction] = {}
        get = acc.get
        base = 0 if family == "f" else _G_OFFSET
        for key, coeff in self._terms.items():
            part = (key & _F_MASK) if family == "f" else (key >> _G_OFFSET)
            pos = 0
            while part:
                e = part & _FIELD
                if e:
                    if pos + 1 >= _NSYM:
                        raise ValueError("derivative order overflow")
                    shift = base + pos * _BITS
                    nk = key - (1 << shift) + (1 << (shift + _BITS))
                    acc[nk] = get(nk, 0) + coeff * e
                part >>= _BITS
                pos += 1
        return TermPoly({k: v for k, v in acc.items() if v}, _trusted=True)

    # evaluation ---------------------------------------------------------
    def evaluate(self, fvals: Sequence[float], gvals: Sequence[float]) -> float:
        """Substitute numbers: ``fvals[k]`` for f_k and ``gvals[k]`` for g_k."""
        total = 0.0
        for key, coeff in self._terms.items():
            fexp, gexp = _unpack(key)
            if len(fexp) > len(fvals) or len(gexp) > len(gvals):
                raise OracleOrderExceeded(
                    f"need derivatives up to order {max(len(fexp), len(gexp)) - 1}"
                )
            term = float(coeff)
            for k, e in enumerate(fexp):
                if e:
                    term *= fvals[k] ** e
            for k, e in enumerate(gexp):
                if e:
                    term *= gvals[k] ** e
            total += term
        return total

    def compile(self) -> "CompiledPoly":
        return CompiledPoly(self)

    # display ------------------------------------------------------------
    def to_lines(self) -> list[str]:
        lines = []
        for mono, coeff in self.monomials():
            factors = [str(coeff)]
            for name, e in mono.items():
                sym = f"{name[0]}_{name[1:]}"
                factors.append(sym if e == 1 else f"{sym}^{e}")
            lines.append(" * ".join(factors))
        return lines

    def __repr__(self) -> str:
        if not self._terms:
            return "TermPoly(0)"
        return "TermPoly(" + " + ".join(self.to_lines()) + ")"


def _sort_key(key: int):
    fexp, gexp = _unpack(key)
    return (sum(fexp) + sum(gexp), fexp, gexp)


class CompiledPoly:
    """Float evaluator for a fixed TermPoly, for use inside trajectory loops."""

    def __init__(self, poly: TermPoly):
        self.terms = []
        self.f_order = -1
        self.g_order = -1
        for key, coeff in poly.items():
            fexp, gexp = _unpack(key)
            fpairs = tuple((k, e) for k, e in enumerate(fexp) if e)
            gpairs = tuple((k, e) for k, e in enumerate(gexp) if e)
            self.f_order = max(self.f_order, len(fexp) - 1)
            self.g_order = max(self.g_order, len(gexp) - 1)
            self.terms.append((float(coeff), fpairs, gpairs))

    def __call__(self, fvals: Sequence[float], gvals: Sequence[float]) -> float:
        if self.f_order >= len(fvals) or self.g_order >= len(gvals):
            raise OracleOrderExceeded("not enough derivative values supplied")
        total = 0.0
        for c, fpairs, gpairs in self.terms:
            for k, e in fpairs:
                c *= fvals[k] ** e
            for k, e in gpairs:
                c *= gvals[k] ** e
            total += c
        return total


def f(k: int = 0) -> TermPoly:
    """The symbol f_k = F^(k)(p)."""
    return TermPoly.symbol("f", k)


def g(k: int = 0) -> TermPoly:
    """The symbol g_k = G^(k)(q)."""
    return TermPoly.symbol("g", k)


def diff_p(t: TermPoly) -> TermPoly:
    return t.diff("f")


def diff_q(t: TermPoly) -> TermPoly:
    return t.diff("g")


def poisson(u: TermPoly, v: TermPoly) -> TermPoly:
    """{u, v} = -du/dp dv/dq + du/dq dv/dp."""
    return diff_q(u) * diff_p(v) - diff_p(u) * diff_q(v)


# ---------------------------------------------------------------------------
# iterated brackets

class BracketWord(tuple):
    """Run lengths (r_1, s_1, ..., r_n, s_n) of an alternating bracket word.

    The runs alternate between the two generators, starting with the
    ``leading`` one passed to :func:`ipb`.  Each pair must be nonempty.
    """

    def __new__(cls, runs: Iterable[int]):
        runs = tuple(int(x) for x in runs)
        if not runs or len(runs) % 2:
            raise ValueError("a bracket word needs an even, nonzero number of run lengths")
        if any(x < 0 for x in runs):
            raise ValueError("run lengths must be nonnegative")
        for i in range(0, len(runs), 2):
            if runs[i] + runs[i + 1] == 0:
                raise ValueError(f"pair {i // 2 + 1} is empty")
        return super().__new__(cls, runs)

    @property
    def rank(self) -> int:
        return len(self) // 2

    @property
    def weight(self) -> int:
        return sum(self)

    def letters(self, leading: str = "G") -> str:
        other = "F" if leading == "G" else "G"
        out = []
        for i, run in enumerate(self):
            out.append((leading if i % 2 == 0 else other) * run)
        return "".join(out)


def _generator(letter: str) -> TermPoly:
    if letter == "F":
        return f(0)
    if letter == "G":
        return g(0)
    raise ValueError(f"unknown generator {letter!r}")


@lru_cache(maxsize=4096)
def ipb_letters(letters: str) -> TermPoly:
    """Left-nested bracket of a letter string: ``"FGG"`` is {{F,G},G}."""
    if not letters:
        raise ValueError("empty bracket word")
    if len(letters) == 1:
        return _generator(letters)
    return poisson(ipb_letters(letters[:-1]), _generator(letters[-1]))


def ipb(word: Iterable[int], leading: str = "G") -> TermPoly:
    """Iterated Poisson bracket {X^{r_1} Y^{s_1} ... } with X the leading generator.

    Brackets are left-nested with the first symbol innermost, so the word
    (1, 2) with leading F is {{F, G}, G}.  A word of weight one returns the
    generator itself.
    """
    if leading not in ("F", "G"):
        raise ValueError("leading must be 'F' or 'G'")
    bw = word if isinstance(word, BracketWord) else BracketWord(word)
    return ipb_letters(bw.letters(leading))


# ---------------------------------------------------------------------------
# BCH corrections

@lru_cache(maxsize=None)
def _bch_degree(n: int) -> TermPoly:
    """Homogeneous degree-n part Z_n of log(exp(F) exp(G)) (Z_1 = F + G)."""
    if n < 1:
        raise ValueError("degree starts at 1")
    fg = f(0) + g(0)
    if n == 1:
        return fg
    total = poisson(_bch_degree(n - 1), g(0) - f(0)).scale(Fraction(1, 2))
    for p in range(1, (n - 1) // 2 + 1):
        coeff = bernoulli(2 * p) / math.factorial(2 * p)
        total = total + _nested_sum(2 * p, n - 1).scale(coeff)
    return total.scale(Fraction(1, n))


@lru_cache(maxsize=None)
def _nested_sum(m: int, s: int) -> TermPoly:
    """Sum over compositions c_1 + ... + c_m = s of {(F+G) Z_{c_m} ... Z_{c_1}}.

    The bracket is left-nested: (F+G) is bracketed first with Z_{c_m} and
    last with Z_{c_1}.  Built by peeling off the outermost factor.
    """
    if m == 1:
        return poisson(f(0) + g(0), _bch_degree(s))
    total = TermPoly()
    for c in range(1, s - m + 2):
        total = total + poisson(_nested_sum(m - 1, s - c), _bch_degree(c))
    return total


def bch_correction(n: int) -> TermPoly:
    """H_n, the coefficient of eta^n in the modified Hamiltonian.

    Computed with the Bernoulli-number recursion for the BCH series.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    return _bch_degree(n + 1)


@lru_cache(maxsize=None)
def dynkin_correction(n: int) -> TermPoly:
    """H_n by direct enumeration of the Dynkin series.

    Words G^{r_1} F^{s_1} ... G^{r_m} F^{s_m} of weight n + 1 carry weight
    (-1)^{m-1} / m / (n+1) / prod(r_i! s_i!).  The left-nested bracket of such
    a word equals (-1)^n times the right-nested commutator of the reversed
    word, which is the orientation that matches exp(eta F) exp(eta G); the
    factor (-1)^n restores it.  Coefficients are aggregated per letter string
    first, so each distinct bracket is computed once.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    k = n + 1
    weights: dict[str, Fraction] = {}
    for m in range(1, k + 1):
        sign = Fraction((-1) ** (m - 1), m)
        for word in block_words(k, m):
            denom = 1
            for x in word:
                denom *= math.factorial(x)
            letters = BracketWord(word).letters("G")
            if len(letters) > 1 and letters[0] == letters[1]:
                continue  # {X, X} = 0 kills the whole bracket
            weights[letters] = weights.get(letters, Fraction(0)) + sign / denom
    orient = (-1) ** n
    total = TermPoly()
    for letters in sorted(weights):
        w = weights[letters]
        if w:
            total = total + ipb_letters(letters).scale(w * orient / k)
    return total


def dump_correction(n: int) -> str:
    """Canonical text listing of H_n, one ``coeff * f_i^a * g_j^b`` per line."""
    lines = bch_correction(n).to_lines()
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# frozen-coefficient Taylor coefficients C_{j,k}

@lru_cache(maxsize=None)
def _phi_coefficient(t: int) -> TermPoly:
    """phi_t = d/dp {F G^t}; phi(eta) = sum_t eta^t / t! phi_t."""
    return diff_p(ipb_letters("F" + "G" * t))


def _series_mul(a: list[TermPoly], b: list[TermPoly], order: int) -> list[TermPoly]:
    out = [TermPoly() for _ in range(order + 1)]
    for i, ai in enumerate(a[: order + 1]):
        if ai.is_zero():
            continue
        for j in range(0, order + 1 - i):
            if j < len(b) and not b[j].is_zero():
                out[i + j] = out[i + j] + ai * b[j]
    return out


class _OmegaTables:
    """Shared caches: derivative tables of H_k and powers of the phi series."""

    def __init__(self):
        self.derivs: dict[tuple[int, int, int], TermPoly] = {}
        self.phi_pows: dict[int, list[TermPoly]] = {}
        self.phi_order = -1

    def deriv(self, k: int, a: int, b: int) -> TermPoly:
        key = (k, a, b)
        hit = self.derivs.get(key)
        if hit is not None:
            return hit
        if a == 0 and b == 0:
            out = bch_correction(k)
        elif a > 0:
            out = diff_p(self.deriv(k, a - 1, b))
        else:
            out = diff_q(self.deriv(k, 0, b - 1))
        self.derivs[key] = out
        return out

    def phi_power(self, e: int, order: int) -> list[TermPoly]:
        """Coefficients 0..order of phi(eta)^e (ordinary, not exponential)."""
        if order > self.phi_order:
            self.phi_pows.clear()
            self.phi_order = order
        hit = self.phi_pows.get(e)
        if hit is not None:
            return hit[: order + 1]
        if e == 0:
            out = [TermPoly.constant(1)] + [TermPoly() for _ in range(self.phi_order)]
        else:
            base = [
                _phi_coefficient(t).scale(Fraction(1, math.factorial(t)))
                for t in range(self.phi_order + 1)
            ]
            out = _series_mul(self.phi_power(e - 1, self.phi_order), base, self.phi_order)
        self.phi_pows[e] = out
        return out[: order + 1]


_TABLES = _OmegaTables()


def omega_coefficient(j: int, k: int) -> TermPoly:
    """C_{j,k}: the eta^j coefficient of the frozen-coefficient shift of H_k.

    Expands sum_i eta^i / i! (-g_1 d/dp + phi(eta) d/dq)^i H_k with g_1 and
    phi treated as constants: the mixed partial of H_k is taken first and the
    coefficient factors are multiplied in afterwards.
    """
    if j < 1 or k < 0:
        raise ValueError("need j >= 1 and k >= 0")
    return _omega(j, k)


@lru_cache(maxsize=None)
def _omega(j: int, k: int) -> TermPoly:
    tables = _TABLES
    g1 = g(1)
    total = TermPoly()
    for i in range(1, j + 1):
        inv_fact = Fraction(1, math.factorial(i))
        for m in range(i + 1):
            phi_series = tables.phi_power(i - m, max(j, tables.phi_order))
            phi_coeff = phi_series[j - i]
            if phi_coeff.is_zero():
                continue
            d = tables.deriv(k, m, i - m)
            if d.is_zero():
                continue
            factor = phi_coeff * (g1 ** m)
            c = inv_fact * math.comb(i, m) * (-1) ** m
            total = total + (d * factor).scale(c)
    return total


def omega_coefficients(pairs: Iterable[tuple[int, int]], jobs: int = 1) -> dict[tuple[int, int], TermPoly]:
    """Compute several C_{j,k}; with ``jobs > 1`` they run in worker processes."""
    pairs = list(pairs)
    if jobs <= 1 or len(pairs) <= 1:
        return {pr: omega_coefficient(*pr) for pr in pairs}
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(_omega_worker, pairs))
    return {pr: TermPoly(terms, _trusted=True) for pr, terms in zip(pairs, results)}


def _omega_worker(pair: tuple[int, int]) -> dict[int, Fraction]:
    return omega_coefficient(*pair).terms


class CancellationResult:
    """Outcome of :func:`cancellation_check`."""

    def __init__(self, passed: bool, checked: list[int], witness_index: int | None = None,
                 witness: TermPoly | None = None):
        self.passed = passed
        self.checked = checked
        self.witness_index = witness_index
        self.witness = witness

    def __bool__(self) -> bool:
        return self.passed

    def __repr__(self) -> str:
        if self.passed:
            return f"CancellationResult(passed, orders={self.checked})"
        return f"CancellationResult(failed at i={self.witness_index}, residual={self.witness!r})"


def cancellation_check(N: int, jobs: int = 1,
                       progress: Callable[[int, bool], None] | None = None) -> CancellationResult:
    """Check that sum_{j=0}^{i} C_{i+1-j, j} vanishes exactly for every i <= N."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    checked = []
    for i in range(N + 1):
        pairs = [(i + 1 - j, j) for j in range(i + 1)]
        coeffs = omega_coefficients(pairs, jobs=jobs)
        residual = TermPoly()
        for pr in pairs:
            residual = residual + coeffs[pr]
        ok = residual.is_zero()
        if progress is not None:
            progress(i, ok)
        if not ok:
            return CancellationResult(False, checked, i, residual)
        checked.append(i)
    return CancellationResult(True, checked)


def phi_terms(N: int, jobs: int = 1) -> list[Fraction]:
    """The per-coefficient l1 norms l1(C_{N+2-m, m}) for m = 0..N."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    pairs = [(N + 2 - m, m) for m in range(N + 1)]
    coeffs = omega_coefficients(pairs, jobs=jobs)
    return [coeffs[pr].l1() for pr in pairs]


def phi_bound(N: int, jobs: int = 1) -> Fraction:
    """Phi(N): l1 mass of the first diagonal of C_{j,k} that does not cancel."""
    return sum(phi_terms(N, jobs=jobs), Fraction(0))


# ---------------------------------------------------------------------------
# numeric evaluation of truncations

@lru_cache(maxsize=None)
def _compiled_correction(n: int) -> CompiledPoly:
    return bch_correction(n).compile()


def truncated_mh_eval(H, z, eta: float, N: int) -> float:
    """sum_{j<=N} eta^j H_j evaluated at z for a one-dimensional Hamiltonian."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    if H.dimension != 1:
        raise ValueError("the symbolic evaluator is one-dimensional; use general_d_truncation_eval")
    p, q = float(z.p[0]), float(z.q[0])
    order = N + 1
    fvals = H.F.derivatives_1d(p, order)
    gvals = H.G.derivatives_1d(q, order)
    total = 0.0
    for j in range(N + 1):
        total += eta**j * _compiled_correction(j)(fvals, gvals)
    return total


def general_d_truncation_eval(H, z, eta: float, N: int) -> float:
    """Truncated modified Hamiltonian in any dimension, for N <= 3.

    Uses the closed bracket expressions
    {F,G} = -grad F . grad G,
    {{F,G},G} = grad G' F'' grad G, {{G,F},F} = grad F' G'' grad F,
    {{{F,G},G},F} = 2 (G'' F'' grad G) . grad F.
    """
    if N < 0:
        raise ValueError("N must be nonnegative")
    if N > 3:
        raise OracleOrderExceeded("the general-dimension evaluator stops at N = 3")
    import numpy as np

    p, q = np.asarray(z.p, dtype=float), np.asarray(z.q, dtype=float)
    total = H.F.value(p) + H.G.value(q)
    if N >= 1:
        gf, gg = H.F.grad(p), H.G.grad(q)
        total += eta * 0.5 * (-(gf @ gg))
    if N >= 2:
        hf, hg = H.F.hess(p), H.G.hess(q)
        total += eta**2 / 12.0 * (gg @ hf @ gg + gf @ hg @ gf)
    if N >= 3:
        total += -(eta**3) / 24.0 * (2.0 * (hg @ (hf @ gg)) @ gf)
    return float(total)
