from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shadowham.core import (
    ConvergenceRadiusExceeded,
    DomainViolation,
    NonRealSpectrum,
    OperatorNormTooLarge,
    PhasePoint,
    SeparableHamiltonian,
    SmoothScalarFamily,
)
from shadowham.integrators import exact_quadratic_step, symplectic_euler_step
from shadowham.mh_closed import (
    AdjointRep1D,
    QuadraticMH,
    conserved_l,
    conserved_s_1d,
    flow_operator_1d,
    integral_form_quadratic_1d,
    interpolating_flow_check_1d,
    log_case_trajectory,
    mh_log,
    mh_quadratic_1d,
    mh_quadratic_multi,
    t_function,
    t_function_taylor,
)


# -- T(eta, lambda) ----------------------------------------------------------

def test_t_at_zero():
    assert t_function(0.7, 0.0) == 1.0
    assert t_function(0.0, 5.0) == 1.0


def test_t_reference_values():
    # 20-digit references computed with mpmath
    assert t_function(0.5, 1.0) == pytest.approx(1.2091995761561452337, rel=1e-14)
    assert t_function(0.5, -1.0) == pytest.approx(0.86081788192800807778, rel=1e-14)


def test_t_taylor_coefficients_by_polynomial_fit():
    # fit T(x) on a small symmetric window, compare low-order coefficients
    xs = np.linspace(-0.05, 0.05, 41)
    ys = np.array([t_function(1.0, x) for x in xs])
    coeffs = np.polynomial.polynomial.polyfit(xs, ys, 8)
    exact = [1.0, 2 / 3, 8 / 15, 16 / 35, 128 / 315]
    for k, c in enumerate(exact):
        assert coeffs[k] == pytest.approx(c, rel=10.0 ** (-10 + 2 * k))


def test_t_taylor_closed_coefficients():
    def c(n):
        return Fraction(4**n * math.factorial(n) ** 2, math.factorial(2 * n + 1))
    assert [c(n) for n in range(5)] == [1, Fraction(2, 3), Fraction(8, 15), Fraction(16, 35), Fraction(128, 315)]
    for x in (-0.3, 0.01, 0.2):
        assert t_function_taylor(x, terms=40) == pytest.approx(t_function(1.0, x), rel=1e-12)


def test_t_is_continuous_across_series_switch():
    for x in (9.9e-6, 1.01e-5, -9.9e-6, -1.01e-5):
        exact_series = sum(float(Fraction(4**n * math.factorial(n) ** 2, math.factorial(2 * n + 1))) * x**n
                           for n in range(10))
        assert t_function(1.0, x) == pytest.approx(exact_series, rel=1e-15)


@pytest.mark.parametrize("eta,lam", [(1.0, 1.0), (2.0, 0.3), (1.0, 4.0)])
def test_t_radius(eta, lam):
    with pytest.raises(ConvergenceRadiusExceeded):
        t_function(eta, lam)


# -- one-dimensional quadratic -------------------------------------------------

def test_mh_over_s_is_t():
    a, b, eta = 0.8, 1.5, 0.3
    for p, q in [(1.0, 0.2), (-0.4, 2.0)]:
        ratio = mh_quadratic_1d(a, b, p, q, eta) / conserved_s_1d(a, b, p, q, eta)
        assert ratio == pytest.approx(t_function(eta, a * b), rel=1e-15)


def test_mh_requires_nonzero_product():
    with pytest.raises(ValueError):
        mh_quadratic_1d(0.0, 1.0, 1.0, 1.0, 0.1)


def test_s_is_invariant():
    a, b, eta = 2.0, 3.0, 0.1
    z = PhasePoint([0.7], [-1.3])
    s0 = conserved_s_1d(a, b, 0.7, -1.3, eta)
    for _ in range(1000):
        z = exact_quadratic_step([[a]], [[b]], z, eta)
        assert abs(conserved_s_1d(a, b, z.p[0], z.q[0], eta) - s0) <= 1e-13 * max(1.0, abs(s0)) * 10


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.01, 0.95), st.floats(-2, 2), st.floats(-2, 2))
def test_s_invariance_property(a, b, frac, p, q):
    eta = frac / math.sqrt(a * b)
    z = exact_quadratic_step([[a]], [[b]], PhasePoint([p], [q]), eta)
    s0 = conserved_s_1d(a, b, p, q, eta)
    s1 = conserved_s_1d(a, b, z.p[0], z.q[0], eta)
    scale = a * p * p + b * q * q + a * b * eta * abs(p * q) + 1e-300
    assert abs(s1 - s0) <= 1e-13 * scale


# -- multivariate quadratic -------------------------------------------------

def spd(rng, d):
    X = rng.normal(size=(d, d))
    return X @ X.T + 0.1 * np.eye(d)


def test_multi_reduces_to_1d():
    for a, b, eta in [(1.0, 2.0, 0.3), (0.5, 0.5, 1.0)]:
        z = PhasePoint([0.4], [-0.9])
        assert mh_quadratic_multi([[a]], [[b]], z, eta) == pytest.approx(
            mh_quadratic_1d(a, b, 0.4, -0.9, eta), rel=1e-14)


def test_multi_conserved_along_iterates():
    rng = np.random.default_rng(5)
    for d in (2, 3, 4):
        B, C = spd(rng, d), spd(rng, d)
        eta = math.sqrt(0.5 / np.linalg.norm(B @ C, 2))
        mh = QuadraticMH.build(B, C, eta)
        z = PhasePoint(rng.normal(size=d), rng.normal(size=d))
        h0 = mh(z)
        drift = 0.0
        for _ in range(1000):
            z = exact_quadratic_step(B, C, z, eta)
            drift = max(drift, abs(mh(z) - h0))
        assert drift <= 1e-11 * abs(h0)


def test_multi_permutation_invariant():
    rng = np.random.default_rng(8)
    B, C = spd(rng, 3), spd(rng, 3)
    eta = math.sqrt(0.3 / np.linalg.norm(B @ C, 2))
    z = PhasePoint(rng.normal(size=3), rng.normal(size=3))
    base = mh_quadratic_multi(B, C, z, eta)
    for perm in ([2, 0, 1], [1, 0, 2]):
        assert mh_quadratic_multi(B, C, z, eta, perm=perm) == pytest.approx(base, rel=1e-12)


def test_multi_commuting_case_uses_matrix_function():
    B, C = np.diag([1.0, 2.0]), np.diag([3.0, 0.5])
    eta = 0.2
    z = PhasePoint([0.3, -0.2], [1.0, 0.5])
    total = sum(mh_quadratic_1d(B[i, i], C[i, i], z.p[i], z.q[i], eta) for i in range(2))
    assert mh_quadratic_multi(B, C, z, eta) == pytest.approx(total, rel=1e-14)


def test_multi_errors():
    with pytest.raises(NonRealSpectrum):
        QuadraticMH.build([[1.0, 0.0], [0.0, -1.0]], [[0.0, 1.0], [1.0, 0.0]], 0.1)
    with pytest.raises(ConvergenceRadiusExceeded):
        QuadraticMH.build(np.eye(2), 4 * np.eye(2), 0.5)


# -- integral form -----------------------------------------------------------

def test_adjoint_matrices_are_nilpotent():
    rep = AdjointRep1D(1.5, 0.5)
    assert np.allclose(np.linalg.matrix_power(rep.ad_F, 3), 0)
    assert np.allclose(np.linalg.matrix_power(rep.ad_G, 3), 0)


@pytest.mark.parametrize("a,b,eta", [(1.0, 1.0, 0.05), (1.0, -1.0, 0.05), (2.0, 3.0, 0.02)])
def test_integral_form_matches_closed_form(a, b, eta):
    cpp, cqq, cpq = integral_form_quadratic_1d(a, b, eta)
    T = t_function(eta, a * b)
    assert cpp == pytest.approx(T * a, rel=1e-12, abs=1e-12)
    assert cqq == pytest.approx(T * b, rel=1e-12, abs=1e-12)
    assert cpq == pytest.approx(-2 * a * b * eta * T, rel=1e-10, abs=1e-12)


def test_integral_form_small_eta_limit():
    assert integral_form_quadratic_1d(1.3, 0.4, 0.0) == (1.3, 0.4, 0.0)
    cpp, cqq, cpq = integral_form_quadratic_1d(1.3, 0.4, 1e-6)
    assert cpp == pytest.approx(1.3, rel=1e-10)
    assert cqq == pytest.approx(0.4, rel=1e-10)
    assert abs(cpq) < 1e-5


def test_integral_form_norm_guard():
    with pytest.raises(OperatorNormTooLarge):
        integral_form_quadratic_1d(1.0, 1.0, 0.9)


# -- interpolating flow --------------------------------------------------------

@pytest.mark.parametrize("a,b,eta", [(1.0, 1.0, 0.3), (2.0, 0.5, 0.6), (1.0, -1.0, 0.4)])
def test_flow_operator_is_one_step_matrix(a, b, eta):
    expected = np.array([[1.0, -2.0 * b * eta], [2.0 * a * eta, 1.0 - 4.0 * a * b * eta * eta]])
    assert np.abs(flow_operator_1d(a, b, eta) - expected).max() <= 1e-12


def test_flow_interpolates_iterates():
    z = PhasePoint([0.8], [-0.3])
    assert interpolating_flow_check_1d(1.0, 2.0, z, 0.25) <= 1e-12
    assert interpolating_flow_check_1d(1.0, 2.0, z, 0.0) == 0.0
    with pytest.raises(ConvergenceRadiusExceeded):
        interpolating_flow_check_1d(1.0, 1.0, z, 1.0)


# -- logarithmic case ----------------------------------------------------------

def test_log_one_step_identity():
    # from (1, 1) with alpha = beta = 0: one symplectic step keeps (alpha + p)(beta + q)
    H = SeparableHamiltonian(SmoothScalarFamily.log(0.0), SmoothScalarFamily.log(0.0), 1)
    z1 = symplectic_euler_step(H, PhasePoint([1.0], [1.0]), 0.1)
    assert abs(z1.p[0] * z1.q[0] - 1.0) <= 1e-15
    assert conserved_l(0, 0, z1.p[0], z1.q[0]) == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("alpha,beta,p0,q0", [(0.0, 0.0, 2.0, 2.0), (1.0, 2.0, 1.0, 1.0)])
def test_log_modified_energy_conserved(alpha, beta, p0, q0):
    eta = 0.1
    orbit = log_case_trajectory(alpha, beta, p0, q0, eta, 10_000)
    vals = [mh_log(0.0, 0.0, u, v, eta) for u, v in orbit]
    assert max(abs(v - vals[0]) for v in vals) <= 1e-10 * abs(vals[0])


def test_log_domain_errors():
    with pytest.raises(DomainViolation):
        conserved_l(0.0, 0.0, -1.0, 1.0)
    with pytest.raises(DomainViolation):
        mh_log(0.0, 0.0, 1.0, 1.0, 0.1)       # L = 0
    with pytest.raises(DomainViolation):
        mh_log(0.0, 0.0, 1.1, 1.0, 0.5)       # eta / L > 1
    with pytest.raises(ValueError):
        mh_log(0.0, 0.0, 2.0, 2.0, 0.0)
    with pytest.raises(DomainViolation):
        log_case_trajectory(0.0, 0.0, 0.1, 0.1, 0.5, 5)
