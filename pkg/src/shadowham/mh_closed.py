"""Closed-form modified Hamiltonians.

The quadratic case (scalar and multivariate), the T-function that links the
scalar case to the elementary conserved quadratic, an independent
integral-form evaluation through 3x3 adjoint matrices, the interpolating
flow check, and the logarithmic case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .core import (
    ConvergenceRadiusExceeded,
    DomainViolation,
    NonRealSpectrum,
    OperatorNormTooLarge,
    PhasePoint,
    QuadratureFailure,
    SeparableHamiltonian,
)
from .integrators import exact_quadratic_matrix_1d, symplectic_euler_step

__all__ = [
    "t_function",
    "t_function_taylor",
    "mh_quadratic_1d",
    "conserved_s_1d",
    "QuadraticMH",
    "mh_quadratic_multi",
    "AdjointRep1D",
    "integral_form_quadratic_1d",
    "interpolating_flow_check_1d",
    "flow_operator_1d",
    "rk4_flow",
    "mh_log",
    "conserved_l",
    "log_case_trajectory",
]


def t_function(eta: float, lam: float) -> float:
    """T(eta, lambda) = arcsin(sqrt(x)) / sqrt(x (1 - x)) with x = lambda eta^2.

    The arcsinh branch covers lambda < 0 and T = 1 at lambda = 0.  Near x = 0
    a short Taylor polynomial replaces the quotient to avoid cancellation.
    """
    x = lam * eta * eta
    if x >= 1.0:
        raise ConvergenceRadiusExceeded(f"lambda * eta^2 = {x} must be < 1")
    if abs(x) < 1e-5:
        return t_function_taylor(x, terms=5)
    if x > 0:
        return math.asin(math.sqrt(x)) / math.sqrt(x * (1.0 - x))
    y = -x
    return math.asinh(math.sqrt(y)) / math.sqrt(y * (1.0 - x))


def _t_coefficients(terms: int) -> list[float]:
    # T(x) = sum_n c_n x^n with c_n = 4^n (n!)^2 / ((2n+1)!) ; exact ratio form
    out = []
    for n in range(terms):
        out.append(4.0**n * math.factorial(n) ** 2 / math.factorial(2 * n + 1))
    return out


def t_function_taylor(x: float, terms: int = 8) -> float:
    """Partial sum of the Taylor series of T in x = lambda eta^2."""
    return math.fsum(c * x**n for n, c in enumerate(_t_coefficients(terms)))


def conserved_s_1d(a: float, b: float, p: float, q: float, eta: float) -> float:
    """S(p, q) = a p^2 + b q^2 - 2 a b eta p q."""
    return a * p * p + b * q * q - 2.0 * a * b * eta * p * q


def mh_quadratic_1d(a: float, b: float, p: float, q: float, eta: float) -> float:
    """Modified Hamiltonian of F = a p^2, G = b q^2: T(eta, ab) S(p, q)."""
    if a * b == 0:
        raise ValueError("need a b != 0")
    return t_function(eta, a * b) * conserved_s_1d(a, b, p, q, eta)


@dataclass(frozen=True)
class QuadraticMH:
    """Spectral data of BC used by the multivariate closed form."""

    B: np.ndarray
    C: np.ndarray
    Q: np.ndarray       # rows are left eigenvectors: BC = Q^{-1} diag(lam) Q
    Q_inv: np.ndarray
    lam: np.ndarray
    eta: float

    @classmethod
    def build(cls, B, C, eta: float, *, perm=None) -> "QuadraticMH":
        B = np.atleast_2d(np.asarray(B, dtype=float))
        C = np.atleast_2d(np.asarray(C, dtype=float))
        B = 0.5 * (B + B.T)
        C = 0.5 * (C + C.T)
        BC = B @ C
        if np.allclose(B @ C, C @ B, atol=1e-14 * (1 + np.abs(BC).max())):
            # commuting pair: BC is symmetric, use the symmetric eigensolver
            lam, W = np.linalg.eigh(0.5 * (BC + BC.T))
        else:
            lam, W = np.linalg.eig(BC)
            scale = 1.0 + np.abs(BC).max()
            if np.max(np.abs(lam.imag)) > 1e-10 * scale:
                raise NonRealSpectrum("BC has non-real eigenvalues")
            lam, W = lam.real, W.real
        if perm is not None:
            perm = np.asarray(perm)
            lam, W = lam[perm], W[:, perm]
        Q_inv = W
        Q = np.linalg.inv(W)
        resid = np.abs(Q_inv @ np.diag(lam) @ Q - BC).max()
        if resid > 1e-9 * (1 + np.abs(BC).max()):
            raise NonRealSpectrum("BC is not diagonalisable to working precision")
        sigma = np.linalg.norm(BC, 2)
        if sigma * eta * eta >= 1.0:
            raise ConvergenceRadiusExceeded(f"sigma_max(BC) eta^2 = {sigma * eta * eta} must be < 1")
        return cls(B, C, Q, Q_inv, lam, float(eta))

    def t_matrix(self) -> np.ndarray:
        """Q^{-1} T(eta, Lambda) Q, i.e. T applied to BC as a matrix function."""
        tv = np.array([t_function(self.eta, l) for l in self.lam])
        return self.Q_inv @ np.diag(tv) @ self.Q

    def cross_matrix(self) -> np.ndarray:
        """Q^{-1} Lambda T(eta, Lambda) Q = BC T(eta, BC)."""
        tv = np.array([l * t_function(self.eta, l) for l in self.lam])
        return self.Q_inv @ np.diag(tv) @ self.Q

    def __call__(self, z: PhasePoint) -> float:
        p, q = z.p, z.q
        Tm = self.t_matrix()
        return float(p @ Tm @ self.B @ p + q @ self.C @ Tm @ q
                     - 2.0 * self.eta * p @ self.cross_matrix() @ q)


def mh_quadratic_multi(B, C, z: PhasePoint, eta: float, *, perm=None) -> float:
    """Modified Hamiltonian of F = p^T B p, G = q^T C q.

    p^T T(BC) B p + q^T C T(BC) q - 2 eta p^T BC T(BC) q, where T(BC) is the
    matrix function Q^{-1} T(eta, Lambda) Q.  For d = 1 this is exactly
    T(eta, bc) (b p^2 + c q^2 - 2 bc eta p q).
    """
    return QuadraticMH.build(B, C, eta, perm=perm)(z)


# ---------------------------------------------------------------------------
# integral form with 3x3 adjoint matrices

@dataclass(frozen=True)
class AdjointRep1D:
    """ad_F = {., F} and ad_G = {., G} on span{p^2, q^2, pq} for F = a p^2, G = b q^2."""

    a: float
    b: float

    @property
    def ad_F(self) -> np.ndarray:
        a = self.a
        return np.array([[0.0, 0.0, 2 * a], [0.0, 0.0, 0.0], [0.0, 4 * a, 0.0]])

    @property
    def ad_G(self) -> np.ndarray:
        b = self.b
        return -np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 2 * b], [4 * b, 0.0, 0.0]])

    def exp_ad_F(self, t: float) -> np.ndarray:
        # ad_F is nilpotent of order 3, so the exponential series stops
        X = t * self.ad_F
        return np.eye(3) + X + 0.5 * X @ X

    def exp_ad_G(self, t: float) -> np.ndarray:
        X = t * self.ad_G
        return np.eye(3) + X + 0.5 * X @ X

    def M(self, t: float) -> np.ndarray:
        return self.exp_ad_G(t) @ self.exp_ad_F(t)

    def v(self, t: float) -> np.ndarray:
        """Coordinates of G + e^{t ad_G} F."""
        return np.array([0.0, self.b, 0.0]) + self.exp_ad_G(t) @ np.array([self.a, 0.0, 0.0])


def _log_kernel_apply(M: np.ndarray, v: np.ndarray, tol: float, max_terms: int = 100000) -> np.ndarray:
    """sum_j (I - M)^j v / (j + 1), stopped once a term falls below tol."""
    D = np.eye(3) - M
    term = v.copy()
    total = v.copy()
    for j in range(1, max_terms):
        term = D @ term
        contrib = term / (j + 1)
        total += contrib
        if np.max(np.abs(contrib)) < tol:
            return total
    raise OperatorNormTooLarge("matrix-log series did not converge")


def integral_form_quadratic_1d(a: float, b: float, eta: float, quad_tol: float = 1e-12,
                               *, norm_samples: int = 65) -> tuple[float, float, float]:
    """(c_pp, c_qq, c_pq) of the modified Hamiltonian from the integral BCH form.

    Evaluates (1/eta) int_0^eta sum_j (I - M(t))^j / (j+1) v(t) dt with
    M(t) = e^{t ad_G} e^{t ad_F} and v(t) the coordinates of G + e^{t ad_G} F.
    The series needs ||M(t) - I|| < 1 on [0, eta]; that is checked on a grid
    of ``norm_samples`` points (the norm grows monotonically with t for these
    nilpotent factors, so the endpoint dominates in practice).
    """
    rep = AdjointRep1D(a, b)
    if eta == 0:
        return (a, b, 0.0)
    for t in np.linspace(0.0, eta, norm_samples):
        nrm = np.linalg.norm(rep.M(t) - np.eye(3), 2)
        if nrm >= 1.0:
            raise OperatorNormTooLarge(f"||M(t) - I|| = {nrm:.4f} >= 1 at t = {t:.4g}")

    series_tol = quad_tol / 10.0

    def component(i: int) -> float:
        val, err = integrate.quad(
            lambda t: _log_kernel_apply(rep.M(t), rep.v(t), series_tol)[i],
            0.0, eta, epsabs=quad_tol * eta, epsrel=quad_tol, limit=200,
        )
        if not np.isfinite(val) or err > 100 * quad_tol * max(1.0, abs(val)) * eta:
            raise QuadratureFailure(f"quadrature error estimate {err:.3e} too large")
        return val / eta

    return (component(0), component(1), component(2))


# ---------------------------------------------------------------------------
# interpolating flow

def rk4_flow(rhs, y0: np.ndarray, t_end: float, n_steps: int) -> np.ndarray:
    """Classical fourth-order Runge-Kutta with a fixed step."""
    y = np.asarray(y0, dtype=float).copy()
    if t_end == 0:
        return y
    h = t_end / n_steps
    for _ in range(n_steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def _closed_form_field(a: float, b: float, eta: float):
    T = t_function(eta, a * b)

    def rhs(y: np.ndarray) -> np.ndarray:
        p, q = y
        dH_dp = T * (2 * a * p - 2 * a * b * eta * q)
        dH_dq = T * (2 * b * q - 2 * a * b * eta * p)
        return np.array([-dH_dq, dH_dp])

    return rhs


def flow_operator_1d(a: float, b: float, eta: float, n_steps: int = 2048) -> np.ndarray:
    """Time-eta solution operator of the closed-form modified Hamiltonian flow."""
    if a * b * eta * eta >= 1.0:
        raise ConvergenceRadiusExceeded("a b eta^2 must be < 1")
    if eta == 0:
        return np.eye(2)
    rhs = _closed_form_field(a, b, eta)
    cols = [rk4_flow(rhs, e, eta, n_steps) for e in np.eye(2)]
    return np.column_stack(cols)


def interpolating_flow_check_1d(a: float, b: float, z: PhasePoint, eta: float,
                                n_steps: int = 2048) -> float:
    """|z(eta) - symplectic Euler step of z|_inf for the modified flow started at z."""
    if a * b * eta * eta >= 1.0:
        raise ConvergenceRadiusExceeded("a b eta^2 must be < 1")
    if eta == 0:
        return 0.0
    y0 = np.array([z.p[0], z.q[0]])
    flowed = rk4_flow(_closed_form_field(a, b, eta), y0, eta, n_steps)
    H = SeparableHamiltonian.quadratic([[a]], [[b]])
    stepped = symplectic_euler_step(H, z, eta).as_array()
    return float(np.max(np.abs(flowed - stepped)))


# ---------------------------------------------------------------------------
# logarithmic case

def conserved_l(alpha: float, beta: float, p: float, q: float) -> float:
    """L(p, q) = log(alpha + p) + log(beta + q)."""
    if alpha + p <= 0 or beta + q <= 0:
        raise DomainViolation("need alpha + p > 0 and beta + q > 0")
    return math.log(alpha + p) + math.log(beta + q)


def mh_log(alpha: float, beta: float, p: float, q: float, eta: float) -> float:
    """log(1 - eta/L) - (eta/L) log(1 - eta/L) as listed for the log case.

    Implemented verbatim; only its dependence on the conserved L matters for
    the conservation property.
    """
    if eta <= 0:
        raise ValueError("mh_log is defined for eta > 0")
    L = conserved_l(alpha, beta, p, q)
    if L == 0:
        raise DomainViolation("L(p, q) = 0")
    r = eta / L
    if r >= 1:
        raise DomainViolation("need eta / L < 1")
    lg = math.log1p(-r)
    return lg - r * lg


def log_case_trajectory(alpha: float, beta: float, p0: float, q0: float, eta: float,
                        steps: int) -> np.ndarray:
    """Symplectic Euler for F = log(alpha + p), G = log(beta + q).

    The iteration runs in the shifted variables u = alpha + p, v = beta + q,
    where it reads u' = u - eta / v, v' = v + eta / u'.  This is the same map
    conjugated by a translation; it avoids the cancellation in alpha + p once
    p approaches -alpha (orbits on the hyperbola u v = c move geometrically,
    by the factor c / (c - eta) per step).  Returns a (steps+1, 2) array of
    (u_k, v_k).
    """
    u, v = float(alpha + p0), float(beta + q0)
    if u <= 0 or v <= 0:
        raise DomainViolation("need alpha + p0 > 0 and beta + q0 > 0")
    out = np.empty((steps + 1, 2))
    out[0] = u, v
    for k in range(1, steps + 1):
        u = u - eta / v
        if not u > 0:
            raise DomainViolation(f"alpha + p left the domain at step {k}")
        v = v + eta / u
        if not np.isfinite(v):
            raise DomainViolation(f"beta + q overflowed at step {k}")
        out[k] = u, v
    return out
