"""Value types shared by every other module.

Phase points, separable Hamiltonians built from smooth scalar families,
Legendre regularizers with their conjugates, Bregman divergences and the
symmetric factorisation of a payoff matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp, softmax

__all__ = [
    "ShadowHamError",
    "DomainViolation",
    "DecompositionUnavailable",
    "OracleFailure",
    "OracleOrderExceeded",
    "ImplicitSolveFailed",
    "UnboundedDomain",
    "ConvergenceRadiusExceeded",
    "NonRealSpectrum",
    "OperatorNormTooLarge",
    "QuadratureFailure",
    "ResourceBudgetExceeded",
    "DegenerateFit",
    "PhasePoint",
    "symplectic_matrix",
    "skew_matrix",
    "SmoothScalarFamily",
    "SeparableHamiltonian",
    "Regularizer",
    "PayoffMatrix",
    "symmetric_decompose",
    "bregman",
    "conjugate_pair_check",
    "ConjugateReport",
    "ENTROPY_FLOOR",
]

ENTROPY_FLOOR = 1e-300


class ShadowHamError(Exception):
    """Base class for the package's domain errors."""


class DomainViolation(ShadowHamError, ValueError):
    pass


class DecompositionUnavailable(ShadowHamError, ValueError):
    pass


class OracleFailure(ShadowHamError, ArithmeticError):
    pass


class OracleOrderExceeded(ShadowHamError, ValueError):
    pass


class ImplicitSolveFailed(ShadowHamError, RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"implicit solve stalled at residual {residual:.3e} after {iterations} iterations")
        self.residual = residual
        self.iterations = iterations


class UnboundedDomain(ShadowHamError, ValueError):
    pass


class ConvergenceRadiusExceeded(ShadowHamError, ValueError):
    pass


class NonRealSpectrum(ShadowHamError, ValueError):
    pass


class OperatorNormTooLarge(ShadowHamError, ValueError):
    pass


class QuadratureFailure(ShadowHamError, RuntimeError):
    pass


class ResourceBudgetExceeded(ShadowHamError, RuntimeError):
    """A symbolic computation ran past its time budget."""


class DegenerateFit(ShadowHamError, ArithmeticError):
    """A log-log fit whose data sit at floating-point noise."""


# ---------------------------------------------------------------------------
# phase space

def _as_vector(x) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ValueError("expected a vector")
    return arr


@dataclass(frozen=True)
class PhasePoint:
    """A point z = (p, q) of phase space; both halves share the dimension d."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p, q = _as_vector(self.p), _as_vector(self.q)
        if p.shape != q.shape:
            raise ValueError(f"p and q differ in dimension: {p.shape} vs {q.shape}")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise ValueError("phase point has non-finite components")
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def dim(self) -> int:
        return self.p.shape[0]

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.p, self.q])

    @classmethod
    def from_array(cls, z: Sequence[float]) -> "PhasePoint":
        z = _as_vector(z)
        if z.shape[0] % 2:
            raise ValueError("stacked phase vector must have even length")
        d = z.shape[0] // 2
        return cls(z[:d], z[d:])


def symplectic_matrix(d: int) -> np.ndarray:
    """Omega = [[0, -I], [I, 0]] so that the Hamiltonian flow is z' = Omega grad H."""
    eye = np.eye(d)
    zero = np.zeros((d, d))
    return np.block([[zero, -eye], [eye, zero]])


def skew_matrix(M: np.ndarray) -> np.ndarray:
    """Omega_M = [[0, -M], [M^T, 0]]."""
    M = np.asarray(M, dtype=float)
    zero = np.zeros_like(M)
    return np.block([[zero, -M], [M.T, zero]])


# ---------------------------------------------------------------------------
# smooth scalar families

def _tanh_polys(order: int) -> list[list[int]]:
    """Integer coefficient lists P_k with d^k/dp^k log cosh p = P_k(tanh p), k >= 1."""
    polys = [[0, 1]]  # P_1(t) = t
    while len(polys) < order:
        prev = polys[-1]
        deriv = [i * c for i, c in enumerate(prev)][1:] or [0]
        # multiply by (1 - t^2)
        out = [0] * (len(deriv) + 2)
        for i, c in enumerate(deriv):
            out[i] += c
            out[i + 2] -= c
        while len(out) > 1 and out[-1] == 0:
            out.pop()
        polys.append(out)
    return polys


_LOGCOSH_ORDER = 24
_TANH_POLYS = _tanh_polys(_LOGCOSH_ORDER)


def _horner(coeffs: Sequence[int], t: float) -> float:
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * t + c
    return acc


def _logcosh(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


class SmoothScalarFamily:
    """A smooth function of one block of phase space with derivative oracles.

    Built-in kinds act coordinatewise and sum over coordinates, except
    ``quadratic`` which is the form x^T M x with M symmetrised on input.
    One-dimensional derivatives of every order up to ``max_order`` are
    available through :meth:`derivatives_1d`.
    """

    def __init__(self, kind: str, *, matrix=None, shift: float = 0.0, exponent: float = 2.0,
                 value: Callable | None = None, grad: Callable | None = None,
                 hess: Callable | None = None, derivative: Callable | None = None,
                 max_order: int | None = None):
        self.kind = kind
        if kind == "quadratic":
            M = np.atleast_2d(np.asarray(matrix, dtype=float))
            if M.shape[0] != M.shape[1]:
                raise ValueError("quadratic coefficient matrix must be square")
            M = 0.5 * (M + M.T)
            M.setflags(write=False)
            self.matrix = M
            self.max_order = 10**9 if max_order is None else max_order
        elif kind == "logcosh":
            self.max_order = _LOGCOSH_ORDER if max_order is None else min(max_order, _LOGCOSH_ORDER)
        elif kind == "log":
            self.shift = float(shift)
            self.max_order = 64 if max_order is None else max_order
        elif kind == "power":
            self.exponent = float(exponent)
            if self.exponent <= 1.0:
                raise ValueError("power family needs exponent > 1")
            self.max_order = 64 if max_order is None else max_order
        elif kind == "custom":
            if value is None or grad is None:
                raise ValueError("custom family needs value and grad oracles")
            self._value, self._grad, self._hess, self._derivative = value, grad, hess, derivative
            if max_order is None:
                max_order = 2 if hess is not None else 1
                if derivative is not None:
                    max_order = 10**9
            self.max_order = max_order
        else:
            raise ValueError(f"unknown family kind {kind!r}")

    # convenient constructors
    @classmethod
    def quadratic(cls, matrix) -> "SmoothScalarFamily":
        return cls("quadratic", matrix=matrix)

    @classmethod
    def logcosh(cls) -> "SmoothScalarFamily":
        return cls("logcosh")

    @classmethod
    def log(cls, shift: float = 0.0) -> "SmoothScalarFamily":
        return cls("log", shift=shift)

    @classmethod
    def power(cls, exponent: float) -> "SmoothScalarFamily":
        return cls("power", exponent=exponent)

    @classmethod
    def custom(cls, value, grad, hess=None, derivative=None, max_order=None) -> "SmoothScalarFamily":
        return cls("custom", value=value, grad=grad, hess=hess, derivative=derivative,
                   max_order=max_order)

    @property
    def dim(self) -> Optional[int]:
        """Fixed dimension if the family has one (quadratic), else None."""
        return self.matrix.shape[0] if self.kind == "quadratic" else None

    def __repr__(self) -> str:
        extra = {
            "quadratic": lambda: f"matrix={self.matrix.tolist()}",
            "logcosh": lambda: "",
            "log": lambda: f"shift={self.shift}",
            "power": lambda: f"exponent={self.exponent}",
            "custom": lambda: "",
        }[self.kind]()
        return f"SmoothScalarFamily({self.kind}{', ' + extra if extra else ''})"

    # oracles -----------------------------------------------------------
    def _check_log_domain(self, x: np.ndarray):
        if np.any(self.shift + x <= 0):
            raise DomainViolation("log family evaluated at shift + x <= 0")

    def value(self, x) -> float:
        x = _as_vector(x)
        k = self.kind
        if k == "quadratic":
            return float(x @ self.matrix @ x)
        if k == "logcosh":
            return float(np.sum(_logcosh(x)))
        if k == "log":
            self._check_log_domain(x)
            return float(np.sum(np.log(self.shift + x)))
        if k == "power":
            with np.errstate(over="ignore"):
                return float(np.sum(np.abs(x) ** self.exponent))
        return float(self._value(x if x.size > 1 else x[0]))

    def grad(self, x) -> np.ndarray:
        x = _as_vector(x)
        k = self.kind
        if k == "quadratic":
            out = 2.0 * self.matrix @ x
        elif k == "logcosh":
            out = np.tanh(x)
        elif k == "log":
            self._check_log_domain(x)
            out = 1.0 / (self.shift + x)
        elif k == "power":
            e = self.exponent
            with np.errstate(over="ignore", invalid="ignore"):
                out = e * np.sign(x) * np.abs(x) ** (e - 1.0)
        else:
            out = _as_vector(self._grad(x if x.size > 1 else x[0]))
        if not np.all(np.isfinite(out)):
            raise OracleFailure(f"non-finite gradient from {self!r}")
        return out

    def hess(self, x) -> np.ndarray:
        x = _as_vector(x)
        k = self.kind
        if k == "quadratic":
            return 2.0 * np.array(self.matrix)
        if k == "logcosh":
            return np.diag(1.0 - np.tanh(x) ** 2)
        if k == "log":
            self._check_log_domain(x)
            return np.diag(-1.0 / (self.shift + x) ** 2)
        if k == "power":
            e = self.exponent
            return np.diag(e * (e - 1.0) * np.abs(x) ** (e - 2.0))
        if self._hess is not None:
            return np.atleast_2d(np.asarray(self._hess(x if x.size > 1 else x[0]), dtype=float))
        if self._derivative is not None and x.size == 1:
            return np.array([[float(self._derivative(2, x[0]))]])
        raise OracleOrderExceeded("custom family has no Hessian oracle")

    def derivative_1d(self, order: int, x: float) -> float:
        """The order-th derivative of the scalar (d = 1) function at x."""
        if order < 0:
            raise ValueError("order must be nonnegative")
        if order > self.max_order:
            raise OracleOrderExceeded(f"{self!r} provides derivatives up to order {self.max_order}")
        x = float(x)
        k = self.kind
        if order == 0:
            return self.value(x)
        if k == "quadratic":
            if self.matrix.shape != (1, 1):
                raise ValueError("derivative_1d needs a 1x1 quadratic")
            a = float(self.matrix[0, 0])
            return 2.0 * a * x if order == 1 else (2.0 * a if order == 2 else 0.0)
        if k == "logcosh":
            return _horner(_TANH_POLYS[order - 1], math.tanh(x))
        if k == "log":
            base = self.shift + x
            if base <= 0:
                raise DomainViolation("log family evaluated at shift + x <= 0")
            return (-1.0) ** (order - 1) * math.factorial(order - 1) / base**order
        if k == "power":
            e = self.exponent
            coeff = 1.0
            for i in range(order):
                coeff *= e - i
            if coeff == 0.0:
                return 0.0
            sign = math.copysign(1.0, x) ** order
            return coeff * sign * abs(x) ** (e - order)
        if self._derivative is not None:
            return float(self._derivative(order, x))
        if order == 1:
            return float(_as_vector(self.grad(x))[0])
        if order == 2:
            return float(self.hess(x)[0, 0])
        raise OracleOrderExceeded("custom family has no higher-derivative oracle")

    def derivatives_1d(self, x: float, order: int) -> list[float]:
        """[F(x), F'(x), ..., F^(order)(x)]."""
        if order > self.max_order:
            raise OracleOrderExceeded(f"{self!r} provides derivatives up to order {self.max_order}")
        if self.kind == "logcosh":
            t = math.tanh(float(x))
            return [self.value(x)] + [_horner(_TANH_POLYS[k - 1], t) for k in range(1, order + 1)]
        return [self.derivative_1d(k, x) for k in range(order + 1)]


@dataclass(frozen=True)
class SeparableHamiltonian:
    """H(p, q) = F(p) + G(q)."""

    F: SmoothScalarFamily
    G: SmoothScalarFamily
    dimension: int = 1

    def __post_init__(self):
        for fam in (self.F, self.G):
            if fam.dim is not None and fam.dim != self.dimension:
                raise ValueError(f"family dimension {fam.dim} does not match {self.dimension}")

    @classmethod
    def quadratic(cls, B, C) -> "SeparableHamiltonian":
        B = np.atleast_2d(np.asarray(B, dtype=float))
        return cls(SmoothScalarFamily.quadratic(B), SmoothScalarFamily.quadratic(C), B.shape[0])

    def __call__(self, z: PhasePoint) -> float:
        return self.F.value(z.p) + self.G.value(z.q)

    energy = __call__

    def grad_p(self, p) -> np.ndarray:
        return self.F.grad(p)

    def grad_q(self, q) -> np.ndarray:
        return self.G.grad(q)

    def vector_field(self, z: PhasePoint) -> np.ndarray:
        """Omega grad H = (-grad G(q), grad F(p))."""
        return np.concatenate([-self.G.grad(z.q), self.F.grad(z.p)])


# ---------------------------------------------------------------------------
# regularizers

class Regularizer:
    """A Legendre-type regularizer with its convex conjugate.

    Kinds: ``half_squared_norm`` (1/2 w^T M w, optionally restricted to a box
    when M is diagonal), ``negative_entropy`` (sum w log w on the simplex) and
    ``custom``.
    """

    def __init__(self, kind: str, dim: int, *, scale=None, bounds=None,
                 value=None, gradient=None, conjugate_value=None, conjugate_gradient=None,
                 domain: str = "all"):
        self.kind = kind
        self.dim = int(dim)
        if kind == "half_squared_norm":
            M = np.eye(self.dim) if scale is None else np.atleast_2d(np.asarray(scale, dtype=float))
            M = 0.5 * (M + M.T)
            if np.any(np.linalg.eigvalsh(M) <= 0):
                raise ValueError("scale matrix must be positive definite")
            self.scale = M
            self.scale_inv = np.linalg.inv(M)
            if bounds is not None:
                if not np.allclose(M, np.diag(np.diag(M))):
                    raise ValueError("box-restricted quadratic needs a diagonal scale")
                lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (self.dim,)) for b in bounds)
                if np.any(lo >= hi):
                    raise ValueError("box bounds must satisfy lo < hi")
                self.bounds = (lo.copy(), hi.copy())
                self.domain = "box"
            else:
                self.bounds = None
                self.domain = "all"
        elif kind == "negative_entropy":
            self.domain = "simplex"
            self.bounds = None
        elif kind == "custom":
            if None in (value, gradient, conjugate_value, conjugate_gradient):
                raise ValueError("custom regularizer needs all four oracles")
            self._v, self._g, self._cv, self._cg = value, gradient, conjugate_value, conjugate_gradient
            self.domain = domain
            self.bounds = bounds
        else:
            raise ValueError(f"unknown regularizer kind {kind!r}")

    @classmethod
    def half_squared_norm(cls, dim: int, scale=None, bounds=None) -> "Regularizer":
        return cls("half_squared_norm", dim, scale=scale, bounds=bounds)

    @classmethod
    def negative_entropy(cls, dim: int) -> "Regularizer":
        return cls("negative_entropy", dim)

    def __repr__(self) -> str:
        return f"Regularizer({self.kind}, dim={self.dim}, domain={self.domain})"

    # domain ------------------------------------------------------------
    def contains(self, w, *, interior: bool = False, tol: float = 1e-9) -> bool:
        w = _as_vector(w)
        if w.shape[0] != self.dim or not np.all(np.isfinite(w)):
            return False
        if self.domain == "simplex":
            if abs(w.sum() - 1.0) > tol:
                return False
            return bool(np.all(w > 0)) if interior else bool(np.all(w >= -tol))
        if self.domain == "box":
            lo, hi = self.bounds
            if interior:
                return bool(np.all(w > lo) and np.all(w < hi))
            return bool(np.all(w >= lo - tol) and np.all(w <= hi + tol))
        return True

    def _require(self, w, interior=False):
        if not self.contains(w, interior=interior):
            raise DomainViolation(f"point outside the {self.domain} domain of {self!r}")

    # oracles -------------------------------------------------------------
    def value(self, w) -> float:
        w = _as_vector(w)
        if self.kind == "half_squared_norm":
            self._require(w)
            return float(0.5 * w @ self.scale @ w)
        if self.kind == "negative_entropy":
            self._require(w)
            wf = np.maximum(w, 0.0)
            safe = np.maximum(wf, ENTROPY_FLOOR)
            return float(np.sum(np.where(wf > 0, wf * np.log(safe), 0.0)))
        return float(self._v(w))

    def gradient(self, w) -> np.ndarray:
        w = _as_vector(w)
        if self.kind == "half_squared_norm":
            return self.scale @ w
        if self.kind == "negative_entropy":
            return np.log(np.maximum(w, ENTROPY_FLOOR)) + 1.0
        return _as_vector(self._g(w))

    def conjugate_value(self, x) -> float:
        x = _as_vector(x)
        if self.kind == "half_squared_norm":
            if self.bounds is None:
                return float(0.5 * x @ self.scale_inv @ x)
            w = self.conjugate_gradient(x)
            return float(w @ x - 0.5 * w @ self.scale @ w)
        if self.kind == "negative_entropy":
            return float(logsumexp(x))
        return float(self._cv(x))

    def conjugate_gradient(self, x) -> np.ndarray:
        x = _as_vector(x)
        if self.kind == "half_squared_norm":
            w = self.scale_inv @ x
            if self.bounds is not None:
                w = np.clip(w, *self.bounds)
            return w
        if self.kind == "negative_entropy":
            return softmax(x)
        return _as_vector(self._cg(x))


def bregman(psi: Regularizer, w, w_ref) -> float:
    """D_psi(w, w_ref) = psi(w) - psi(w_ref) - grad psi(w_ref) . (w - w_ref)."""
    w, w_ref = _as_vector(w), _as_vector(w_ref)
    if not psi.contains(w):
        raise DomainViolation("first argument outside the regularizer domain")
    if not psi.contains(w_ref, interior=psi.domain == "simplex"):
        raise DomainViolation("reference point must lie in the domain (interior for entropy)")
    if psi.kind == "negative_entropy":
        # closed form avoids cancellation between the two entropy values
        safe_ref = np.maximum(w_ref, ENTROPY_FLOOR)
        pos = w > 0
        kl = np.sum(w[pos] * (np.log(w[pos]) - np.log(safe_ref[pos])))
        return float(max(kl - w.sum() + w_ref.sum(), 0.0))
    diff = w - w_ref
    if psi.kind == "half_squared_norm":
        return float(0.5 * diff @ psi.scale @ diff)
    return float(psi.value(w) - psi.value(w_ref) - psi.gradient(w_ref) @ diff)


@dataclass
class ConjugateReport:
    max_residual: float
    passed: bool
    worst_index: int = -1
    tolerance: float = 1e-10


def conjugate_pair_check(psi: Regularizer, samples, tol: float = 1e-10) -> ConjugateReport:
    """Max over samples of |grad psi*(grad psi(w)) - w|_inf."""
    worst, idx = 0.0, -1
    for i, w in enumerate(samples):
        w = _as_vector(w)
        r = float(np.max(np.abs(psi.conjugate_gradient(psi.gradient(w)) - w)))
        if r > worst or idx < 0:
            worst, idx = max(worst, r), i
    return ConjugateReport(worst, worst <= tol, idx, tol)


# ---------------------------------------------------------------------------
# payoff matrices

def symmetric_decompose(A, *, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Factor A = U V with U, V real symmetric.

    Symmetric input returns (A, I).  Otherwise A must be real
    diagonalisable: with A = Q D Q^{-1}, U = Q D Q^T and V = (Q Q^T)^{-1}.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("payoff matrix must be square")
    if not np.all(np.isfinite(A)):
        raise ValueError("payoff matrix has non-finite entries")
    d = A.shape[0]
    if np.array_equal(A, A.T):
        return A.copy(), np.eye(d)
    evals, Q = np.linalg.eig(A)
    scale = 1.0 + np.max(np.abs(A))
    if np.max(np.abs(evals.imag)) > 1e-12 * scale:
        raise DecompositionUnavailable("payoff matrix has non-real eigenvalues")
    evals, Q = evals.real, Q.real
    if np.linalg.cond(Q) > 1e12:
        raise DecompositionUnavailable("payoff matrix is defective (ill-conditioned eigenbasis)")
    U = Q @ np.diag(evals) @ Q.T
    V = np.linalg.inv(Q @ Q.T)
    U = 0.5 * (U + U.T)
    V = 0.5 * (V + V.T)
    if np.max(np.abs(A - U @ V)) > tol * scale:
        raise DecompositionUnavailable("symmetric factorisation failed the residual check")
    return U, V


@dataclass(frozen=True)
class PayoffMatrix:
    """Payoff A with a symmetric factorisation A = U V when one exists."""

    A: np.ndarray
    U: Optional[np.ndarray] = None
    V: Optional[np.ndarray] = None
    status: str = "failed"

    @classmethod
    def from_matrix(cls, A) -> "PayoffMatrix":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        try:
            U, V = symmetric_decompose(A)
        except DecompositionUnavailable:
            return cls(A, None, None, "failed")
        return cls(A, U, V, "exact")

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def factors(self) -> tuple[np.ndarray, np.ndarray]:
        if self.status != "exact":
            raise DecompositionUnavailable("no symmetric factorisation for this payoff")
        return self.U, self.V

    def skew(self) -> np.ndarray:
        return skew_matrix(self.A)
