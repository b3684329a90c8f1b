"""Forward, backward and symplectic Euler for separable Hamiltonians."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

from .core import ImplicitSolveFailed, OracleFailure, PhasePoint, SeparableHamiltonian

__all__ = [
    "Scheme",
    "StepperConfig",
    "TrajectoryRecord",
    "StepFailed",
    "symplectic_euler_step",
    "forward_euler_step",
    "backward_euler_step",
    "exact_quadratic_step",
    "exact_quadratic_matrix_1d",
    "run_trajectory",
    "step_jacobian",
]


class Scheme(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    SYMPLECTIC = "symplectic"
    EXACT_QUADRATIC = "exact_quadratic"


@dataclass(frozen=True)
class StepperConfig:
    eta: float
    scheme: Scheme = Scheme.SYMPLECTIC
    implicit_tol: float = 1e-13
    implicit_max_iter: int = 200

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("step size eta must be positive")
        if not self.implicit_tol > 0:
            raise ValueError("implicit_tol must be positive")
        object.__setattr__(self, "scheme", Scheme(self.scheme))


class StepFailed(RuntimeError):
    """A step inside run_trajectory raised; carries the failing index."""

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"step {index} failed: {cause}")
        self.index = index
        self.cause = cause


def _finite(v: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(v)):
        raise OracleFailure(f"non-finite {what}")
    return v


def symplectic_euler_step(H: SeparableHamiltonian, z: PhasePoint, eta: float) -> PhasePoint:
    """p' = p - eta grad G(q); q' = q + eta grad F(p')."""
    p_new = z.p - eta * _finite(H.G.grad(z.q), "grad G")
    q_new = z.q + eta * _finite(H.F.grad(p_new), "grad F")
    return PhasePoint(p_new, q_new)


def forward_euler_step(H: SeparableHamiltonian, z: PhasePoint, eta: float) -> PhasePoint:
    """p' = p - eta grad G(q); q' = q + eta grad F(p)."""
    p_new = z.p - eta * _finite(H.G.grad(z.q), "grad G")
    q_new = z.q + eta * _finite(H.F.grad(z.p), "grad F")
    return PhasePoint(p_new, q_new)


def backward_euler_step(H: SeparableHamiltonian, z: PhasePoint, eta: float, *,
                        tol: float = 1e-13, max_iter: int = 200,
                        linear_solve: bool = False) -> tuple[PhasePoint, int]:
    """Solve p' = p - eta grad G(q'), q' = q + eta grad F(p').

    Returns the new point and the number of fixed-point sweeps used.  With
    ``linear_solve`` and a quadratic Hamiltonian the 2d x 2d system is solved
    directly instead.
    """
    if eta == 0:
        return z, 0
    if linear_solve:
        if H.F.kind != "quadratic" or H.G.kind != "quadratic":
            raise ValueError("linear_solve needs a quadratic Hamiltonian")
        d = z.dim
        B, C = H.F.matrix, H.G.matrix
        system = np.block([[np.eye(d), 2 * eta * C], [-2 * eta * B, np.eye(d)]])
        sol = np.linalg.solve(system, z.as_array())
        return PhasePoint(sol[:d], sol[d:]), 0
    p_new, q_new = z.p.copy(), z.q.copy()
    residual = np.inf
    for it in range(1, max_iter + 1):
        p_new = z.p - eta * H.G.grad(q_new)
        q_new = z.q + eta * H.F.grad(p_new)
        rp = p_new - (z.p - eta * H.G.grad(q_new))
        residual = float(np.max(np.abs(rp)))  # q equation holds exactly after the sweep
        if not np.isfinite(residual):
            break
        if residual <= tol:
            return PhasePoint(p_new, q_new), it
    raise ImplicitSolveFailed(residual, max_iter)


def exact_quadratic_step(B, C, z: PhasePoint, eta: float) -> PhasePoint:
    """Symplectic Euler for F = p^T B p, G = q^T C q, written as linear algebra."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    B = 0.5 * (B + B.T)
    C = 0.5 * (C + C.T)
    if B.shape == (1, 1):
        M = exact_quadratic_matrix_1d(B[0, 0], C[0, 0], eta)
        out = M @ np.array([z.p[0], z.q[0]])
        return PhasePoint(out[:1], out[1:])
    p_new = z.p - 2.0 * eta * (C @ z.q)
    q_new = z.q + 2.0 * eta * (B @ p_new)
    return PhasePoint(p_new, q_new)


def exact_quadratic_matrix_1d(a: float, b: float, eta: float) -> np.ndarray:
    """The one-step matrix [[1, -2 b eta], [2 a eta, 1 - 4 a b eta^2]]."""
    return np.array([[1.0, -2.0 * b * eta], [2.0 * a * eta, 1.0 - 4.0 * a * b * eta * eta]])


@dataclass
class TrajectoryRecord:
    points: list[PhasePoint]
    energies: list[float]
    config: StepperConfig
    iterations: list[int] = field(default_factory=list)

    def __post_init__(self):
        if len(self.points) != len(self.energies):
            raise ValueError("points and energies must have equal length")

    @property
    def steps(self) -> int:
        return len(self.points) - 1

    def array(self) -> np.ndarray:
        """Stacked (K+1, 2d) array of phase points."""
        return np.vstack([z.as_array() for z in self.points])

    def write_csv(self, out: TextIO) -> None:
        d = self.points[0].dim
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["step"] + [f"p_{i}" for i in range(d)] + [f"q_{i}" for i in range(d)] + ["H"])
        for k, (z, h) in enumerate(zip(self.points, self.energies)):
            writer.writerow([k] + [repr(float(x)) for x in z.p] + [repr(float(x)) for x in z.q]
                            + [repr(float(h))])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _stepper(H: SeparableHamiltonian, config: StepperConfig) -> Callable[[PhasePoint], tuple[PhasePoint, int]]:
    eta = config.eta
    if config.scheme is Scheme.SYMPLECTIC:
        return lambda z: (symplectic_euler_step(H, z, eta), 0)
    if config.scheme is Scheme.FORWARD:
        return lambda z: (forward_euler_step(H, z, eta), 0)
    if config.scheme is Scheme.BACKWARD:
        return lambda z: backward_euler_step(H, z, eta, tol=config.implicit_tol,
                                             max_iter=config.implicit_max_iter)
    if H.F.kind != "quadratic" or H.G.kind != "quadratic":
        raise ValueError("the exact quadratic scheme needs quadratic F and G")
    B, C = H.F.matrix, H.G.matrix
    return lambda z: (exact_quadratic_step(B, C, z, eta), 0)


def run_trajectory(H: SeparableHamiltonian, z0: PhasePoint, config: StepperConfig,
                   steps: int) -> TrajectoryRecord:
    """Apply the configured one-step map ``steps`` times."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    step = _stepper(H, config)
    points = [z0]
    energies = [H(z0)]
    iterations = []
    z = z0
    for k in range(steps):
        try:
            z, its = step(z)
        except Exception as exc:  # re-raised with the index attached
            raise StepFailed(k, exc) from exc
        points.append(z)
        energies.append(H(z))
        iterations.append(its)
    return TrajectoryRecord(points, energies, config, iterations)


def step_jacobian(step: Callable[[PhasePoint], PhasePoint], z: PhasePoint, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of a one-step map at z."""
    x0 = z.as_array()
    n = x0.shape[0]
    J = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        plus = step(PhasePoint.from_array(x0 + e)).as_array()
        minus = step(PhasePoint.from_array(x0 - e)).as_array()
        J[:, i] = (plus - minus) / (2 * h)
    return J
