"""Alternating mirror descent on bilinear zero-sum games.

The primal algorithm (AMD), its dual form (DAMD), the linear pushforward
from symplectic Euler, duality gaps, regrets and the exact identities that
tie them together.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Sequence, TextIO

import numpy as np

from .core import (
    DomainViolation,
    OracleFailure,
    PayoffMatrix,
    PhasePoint,
    Regularizer,
    SeparableHamiltonian,
    SmoothScalarFamily,
    UnboundedDomain,
)
from .integrators import symplectic_euler_step

__all__ = [
    "Domain",
    "GameInstance",
    "StrategyPair",
    "DualPoint",
    "GameTrajectory",
    "amd_step",
    "damd_step",
    "run_amd",
    "pushforward_check",
    "skew_gradient_field",
    "skew_gradient_check",
    "conjugacy_residual",
    "duality_gap",
    "average_iterate_gap",
    "cumulative_regret",
    "total_regret",
    "modified_hamiltonian_first_order",
    "regret_formula_rhs",
    "regret_formula_residual",
    "regret_formula_residual_pq",
    "verify_gap_regret_identity",
    "running_average_gaps",
    "gap_envelope",
    "entropic_simplex_game",
    "random_entropic_game",
    "quadratic_game",
]


# ---------------------------------------------------------------------------
# domains and game description

@dataclass(frozen=True)
class Domain:
    """Strategy set: the probability simplex, a box, or all of R^d."""

    kind: str
    dim: int
    lower: Optional[tuple[float, ...]] = None
    upper: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.kind not in ("simplex", "box", "unconstrained"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("domain dimension must be positive")
        if self.kind == "box":
            if self.lower is None or self.upper is None:
                raise ValueError("box domain needs lower and upper bounds")
            lo = tuple(float(v) for v in np.broadcast_to(self.lower, (self.dim,)))
            hi = tuple(float(v) for v in np.broadcast_to(self.upper, (self.dim,)))
            if any(l >= h for l, h in zip(lo, hi)):
                raise ValueError("box bounds must satisfy lower < upper")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)

    @classmethod
    def simplex(cls, dim: int) -> "Domain":
        return cls("simplex", dim)

    @classmethod
    def box(cls, dim: int, lower, upper) -> "Domain":
        return cls("box", dim, lower, upper)

    @classmethod
    def unconstrained(cls, dim: int) -> "Domain":
        return cls("unconstrained", dim)

    def contains(self, w, tol: float = 1e-12) -> bool:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.dim,) or not np.all(np.isfinite(w)):
            return False
        if self.kind == "simplex":
            return abs(w.sum() - 1.0) <= tol and bool(np.all(w >= -tol))
        if self.kind == "box":
            return bool(np.all(w >= np.array(self.lower) - tol) and np.all(w <= np.array(self.upper) + tol))
        return True

    def vertices(self) -> np.ndarray:
        """Extreme points, one per row (box vertices grow as 2^d)."""
        if self.kind == "simplex":
            return np.eye(self.dim)
        if self.kind == "box":
            lo, hi = np.array(self.lower), np.array(self.upper)
            idx = np.array(np.meshgrid(*[[0, 1]] * self.dim, indexing="ij")).reshape(self.dim, -1).T
            return np.where(idx == 1, hi, lo)
        raise UnboundedDomain("an unconstrained domain has no vertices")

    def support(self, c) -> float:
        """max over the domain of c . w, attained at a vertex."""
        c = np.asarray(c, dtype=float)
        if self.kind == "simplex":
            return float(np.max(c))
        if self.kind == "box":
            # sign split: each coordinate independently picks the better bound
            return float(np.sum(np.maximum(c * np.array(self.lower), c * np.array(self.upper))))
        raise UnboundedDomain("linear maximisation over an unconstrained domain")


def _domain_of(reg: Regularizer) -> Domain:
    if reg.domain == "simplex":
        return Domain.simplex(reg.dim)
    if reg.domain == "box":
        return Domain.box(reg.dim, reg.bounds[0], reg.bounds[1])
    return Domain.unconstrained(reg.dim)


@dataclass(frozen=True)
class GameInstance:
    """min over a, max over b of a^T A b with regularizers alpha, beta."""

    payoff: PayoffMatrix
    domain_a: Domain
    domain_b: Domain
    reg_a: Regularizer
    reg_b: Regularizer

    def __post_init__(self):
        d = self.payoff.dim
        for dom, reg, side in ((self.domain_a, self.reg_a, "a"), (self.domain_b, self.reg_b, "b")):
            if dom.dim != d or reg.dim != d:
                raise ValueError(f"dimension mismatch on side {side}")
            if _domain_of(reg) != dom:
                raise ValueError(f"regularizer domain {reg.domain} does not match the {dom.kind} domain of {side}")

    @classmethod
    def build(cls, A, reg_a: Regularizer, reg_b: Regularizer) -> "GameInstance":
        payoff = A if isinstance(A, PayoffMatrix) else PayoffMatrix.from_matrix(A)
        return cls(payoff, _domain_of(reg_a), _domain_of(reg_b), reg_a, reg_b)

    @property
    def A(self) -> np.ndarray:
        return self.payoff.A

    @property
    def dim(self) -> int:
        return self.payoff.dim

    def f(self, x) -> float:
        return self.reg_a.conjugate_value(x)

    def g(self, y) -> float:
        return self.reg_b.conjugate_value(y)

    def grad_f(self, x) -> np.ndarray:
        return self.reg_a.conjugate_gradient(x)

    def grad_g(self, y) -> np.ndarray:
        return self.reg_b.conjugate_gradient(y)


def entropic_simplex_game(A) -> GameInstance:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d = A.shape[0]
    return GameInstance.build(A, Regularizer.negative_entropy(d), Regularizer.negative_entropy(d))


def quadratic_game(A, scale_a=None, scale_b=None) -> GameInstance:
    """Unconstrained game with alpha = 1/2 a^T M a and beta = 1/2 b^T N b."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d = A.shape[0]
    return GameInstance.build(A, Regularizer.half_squared_norm(d, scale_a),
                              Regularizer.half_squared_norm(d, scale_b))


def random_entropic_game(rng: np.random.Generator, d: int) -> tuple[GameInstance, np.ndarray, np.ndarray]:
    """Gaussian payoff on the d-simplex with a random interior start."""
    A = rng.normal(size=(d, d))
    a0 = rng.dirichlet(np.ones(d))
    b0 = rng.dirichlet(np.ones(d))
    return entropic_simplex_game(A), a0, b0


@dataclass(frozen=True)
class StrategyPair:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        for name in ("a", "b"):
            v = np.array(getattr(self, name), dtype=float).ravel()
            if not np.all(np.isfinite(v)):
                raise DomainViolation(f"non-finite strategy {name}")
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    def check(self, game: GameInstance) -> "StrategyPair":
        if not game.domain_a.contains(self.a):
            raise DomainViolation("a lies outside its strategy set")
        if not game.domain_b.contains(self.b):
            raise DomainViolation("b lies outside its strategy set")
        return self


@dataclass(frozen=True)
class DualPoint:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        for name in ("x", "y"):
            v = np.array(getattr(self, name), dtype=float).ravel()
            if not np.all(np.isfinite(v)):
                raise OracleFailure(f"non-finite dual coordinate {name}")
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def from_primal(cls, game: GameInstance, pair: StrategyPair) -> "DualPoint":
        return cls(game.reg_a.gradient(pair.a), game.reg_b.gradient(pair.b))

    def to_primal(self, game: GameInstance) -> StrategyPair:
        return StrategyPair(game.grad_f(self.x), game.grad_g(self.y))


# ---------------------------------------------------------------------------
# the algorithms

def _interior(game: GameInstance, pair: StrategyPair):
    if not game.reg_a.contains(pair.a, interior=game.domain_a.kind == "simplex"):
        raise DomainViolation("a must be interior for the mirror map")
    if not game.reg_b.contains(pair.b, interior=game.domain_b.kind == "simplex"):
        raise DomainViolation("b must be interior for the mirror map")


def _mapped(reg: Regularizer, x: np.ndarray, what: str) -> np.ndarray:
    w = reg.conjugate_gradient(x)
    if not reg.contains(w):
        raise DomainViolation(f"{what} left the range of the conjugate gradient")
    return w


def amd_step(game: GameInstance, pair: StrategyPair, eta: float) -> StrategyPair:
    """One alternating mirror descent step; the b update sees the new a."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if eta == 0:
        return pair
    _interior(game, pair)
    A = game.A
    x_new = game.reg_a.gradient(pair.a) - eta * (A @ pair.b)
    a_new = _mapped(game.reg_a, x_new, "a")
    y_new = game.reg_b.gradient(pair.b) + eta * (A.T @ a_new)
    b_new = _mapped(game.reg_b, y_new, "b")
    return StrategyPair(a_new, b_new)


def damd_step(grad_f, grad_g, A, point: DualPoint, eta: float) -> DualPoint:
    """x' = x - eta A grad g(y); y' = y + eta A^T grad f(x')."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    gy = np.asarray(grad_g(point.y), dtype=float)
    if not np.all(np.isfinite(gy)):
        raise OracleFailure("non-finite grad g")
    x_new = point.x - eta * (A @ gy)
    fx = np.asarray(grad_f(x_new), dtype=float)
    if not np.all(np.isfinite(fx)):
        raise OracleFailure("non-finite grad f")
    y_new = point.y + eta * (A.T @ fx)
    return DualPoint(x_new, y_new)


def conjugacy_residual(game: GameInstance, side: str, w_new, w_old, other, eta: float) -> float:
    """|grad psi(w_new) - grad psi(w_old) -/+ eta (A or A^T) other|_inf.

    On the simplex the mirror map is determined only up to adding a multiple
    of the all-ones vector (the normal direction of the affine hull), so that
    component is removed before taking the norm.
    """
    A = game.A
    if side == "a":
        reg, dom = game.reg_a, game.domain_a
        r = reg.gradient(w_new) - reg.gradient(w_old) + eta * (A @ other)
    elif side == "b":
        reg, dom = game.reg_b, game.domain_b
        r = reg.gradient(w_new) - reg.gradient(w_old) - eta * (A.T @ other)
    else:
        raise ValueError("side must be 'a' or 'b'")
    if dom.kind == "simplex":
        r = r - r.mean()
    return float(np.max(np.abs(r)))


@dataclass
class GameTrajectory:
    """AMD iterates with the matching DAMD dual iterates.

    ``x`` and ``y`` hold the dual sequence x_{k+1} = x_k - eta A b_k,
    y_{k+1} = y_k + eta A^T a_{k+1} started at the mirror image of (a_0, b_0).
    For interior iterates they agree with grad alpha(a_k), grad beta(b_k) (on
    the simplex, up to the constant direction).
    """

    game: GameInstance
    eta: float
    a: np.ndarray
    b: np.ndarray
    x: np.ndarray
    y: np.ndarray

    @property
    def K(self) -> int:
        return self.a.shape[0] - 1

    def prefix(self, K: int) -> "GameTrajectory":
        if not 0 <= K <= self.K:
            raise ValueError("prefix length out of range")
        return GameTrajectory(self.game, self.eta, self.a[:K + 1], self.b[:K + 1],
                              self.x[:K + 1], self.y[:K + 1])

    def pair(self, k: int) -> StrategyPair:
        return StrategyPair(self.a[k], self.b[k])

    def write_csv(self, out: TextIO, *, with_gap: bool = True) -> None:
        d = self.game.dim
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["step"] + [f"a_{i}" for i in range(d)] + [f"b_{i}" for i in range(d)]
                   + [f"x_{i}" for i in range(d)] + [f"y_{i}" for i in range(d)]
                   + ["gap", "running_avg_gap"])
        sa, sb = np.zeros(d), np.zeros(d)
        for k in range(self.K + 1):
            row = [k] + [repr(float(v)) for arr in (self.a[k], self.b[k], self.x[k], self.y[k]) for v in arr]
            if with_gap:
                gap = duality_gap(self.game, self.pair(k))
                sa += self.a[k]
                sb += self.b[k]
                avg = duality_gap(self.game, StrategyPair(sa / (k + 1), sb / (k + 1)))
                row += [repr(gap), repr(avg)]
            else:
                row += ["", ""]
            w.writerow(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def run_amd(game: GameInstance, a0, b0, eta: float, K: int) -> GameTrajectory:
    """K steps of AMD, carried in dual coordinates."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    if not eta > 0:
        raise ValueError("eta must be positive")
    start = StrategyPair(a0, b0).check(game)
    _interior(game, start)
    d = game.dim
    A = game.A
    a = np.empty((K + 1, d))
    b = np.empty((K + 1, d))
    x = np.empty((K + 1, d))
    y = np.empty((K + 1, d))
    a[0], b[0] = start.a, start.b
    x[0], y[0] = game.reg_a.gradient(start.a), game.reg_b.gradient(start.b)
    for k in range(K):
        x[k + 1] = x[k] - eta * (A @ b[k])
        a[k + 1] = _mapped(game.reg_a, x[k + 1], "a")
        y[k + 1] = y[k] + eta * (A.T @ a[k + 1])
        b[k + 1] = _mapped(game.reg_b, y[k + 1], "b")
    return GameTrajectory(game, float(eta), a, b, x, y)


# ---------------------------------------------------------------------------
# pushforward from symplectic Euler

def _pulled_back(conj_value, conj_grad, M: np.ndarray) -> SmoothScalarFamily:
    """The family p -> phi(M p) with gradient M grad phi(M p)."""
    def value(p):
        return conj_value(M @ np.atleast_1d(p))

    def grad(p):
        return M @ conj_grad(M @ np.atleast_1d(p))

    return SmoothScalarFamily.custom(value, grad)


def pushforward_hamiltonian(game: GameInstance) -> SeparableHamiltonian:
    """F(p) = f(U p), G(q) = g(V q) for the symmetric factorisation A = U V."""
    U, V = game.payoff.factors()
    F = _pulled_back(game.f, game.grad_f, U)
    G = _pulled_back(game.g, game.grad_g, V)
    return SeparableHamiltonian(F, G, game.dim)


def pushforward_check(game: GameInstance, z0: PhasePoint, eta: float, K: int) -> float:
    """max_k |(U p_k, V q_k) - (x_k, y_k)|_inf for symplectic Euler versus DAMD."""
    U, V = game.payoff.factors()
    H = pushforward_hamiltonian(game)
    z = z0
    dual = DualPoint(U @ z0.p, V @ z0.q)
    worst = 0.0
    for _ in range(K):
        z = symplectic_euler_step(H, z, eta)
        dual = damd_step(game.grad_f, game.grad_g, game.A, dual, eta)
        dev = max(np.max(np.abs(U @ z.p - dual.x)), np.max(np.abs(V @ z.q - dual.y)))
        worst = max(worst, float(dev))
    return worst


def skew_gradient_field(A, grad_f_x, grad_g_y) -> np.ndarray:
    """[[0, -A], [A^T, 0]] applied to (grad f(x), grad g(y))."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return np.concatenate([-(A @ grad_g_y), A.T @ grad_f_x])


def skew_gradient_check(game: GameInstance, z: PhasePoint) -> float:
    """Distance between the pushed-forward Hamiltonian field and the skew-gradient field."""
    U, V = game.payoff.factors()
    H = pushforward_hamiltonian(game)
    field = H.vector_field(z)
    d = game.dim
    pushed = np.concatenate([U @ field[:d], V @ field[d:]])
    x, y = U @ z.p, V @ z.q
    target = skew_gradient_field(game.A, game.grad_f(x), game.grad_g(y))
    return float(np.max(np.abs(pushed - target)))


# ---------------------------------------------------------------------------
# gaps and regrets

def duality_gap(game: GameInstance, pair: StrategyPair) -> float:
    """max over b' of a^T A b' minus min over a' of a'^T A b."""
    A = game.A
    best_b = game.domain_b.support(A.T @ pair.a)
    worst_a = -game.domain_a.support(-(A @ pair.b))
    return float(max(best_b - worst_a, 0.0))


_CONVENTIONS = ("synchronous", "shifted", "alternating")


def _averages(traj: GameTrajectory, K: int, convention: str) -> tuple[np.ndarray, np.ndarray]:
    if convention == "synchronous":
        return traj.a[:K].mean(axis=0), traj.b[:K].mean(axis=0)
    if convention == "shifted":
        return traj.a[1:K + 1].mean(axis=0), traj.b[1:K + 1].mean(axis=0)
    if convention == "alternating":
        return traj.a[1:K + 1].mean(axis=0), traj.b[:K].mean(axis=0)
    raise ValueError(f"convention must be one of {_CONVENTIONS}")


def average_iterate_gap(game: GameInstance, traj: GameTrajectory, K: Optional[int] = None,
                        convention: str = "synchronous") -> float:
    """Duality gap at the average iterates of the first K steps.

    ``synchronous`` averages a_0..a_{K-1} and b_0..b_{K-1}; ``shifted``
    averages indices 1..K on both sides; ``alternating`` pairs a_1..a_K with
    b_0..b_{K-1}, the pairing under which the gap equals the total regret
    identity exactly.
    """
    K = traj.K if K is None else K
    if K < 1:
        raise ValueError("K must be at least 1")
    if K > traj.K:
        raise ValueError("trajectory shorter than K")
    a_bar, b_bar = _averages(traj, K, convention)
    return duality_gap(game, StrategyPair(a_bar, b_bar))


def _half_step_sum(traj: GameTrajectory, K: int) -> float:
    A = traj.game.A
    a, b = traj.a, traj.b
    total = 0.0
    for k in range(K):
        total += 0.5 * (a[k] + a[k + 1]) @ A @ b[k]
        total -= a[k + 1] @ A @ (0.5 * (b[k] + b[k + 1]))
    return float(total)


def cumulative_regret(game: GameInstance, traj: GameTrajectory, comparator: StrategyPair,
                      K: Optional[int] = None) -> float:
    """R_{1,K}(a) + R_{2,K}(b) with the half-step averaging convention."""
    K = traj.K if K is None else K
    if K == 0:
        return 0.0
    A = game.A
    a, b = traj.a[:K + 1], traj.b[:K + 1]
    Ab = b[:K] @ A.T                      # row k is A b_k
    r1 = np.sum((0.5 * (a[:K] + a[1:])) * Ab) - comparator.a @ Ab.sum(axis=0)
    aA = a[1:] @ A                        # row k is a_{k+1}^T A
    r2 = aA.sum(axis=0) @ comparator.b - np.sum(aA * (0.5 * (b[:K] + b[1:])))
    return float(r1 + r2)


def total_regret(game: GameInstance, traj: GameTrajectory, K: Optional[int] = None) -> float:
    """Best cumulative regret in hindsight, maximised over domain vertices."""
    K = traj.K if K is None else K
    if K == 0:
        return 0.0
    A = game.A
    sum_b = traj.b[:K].sum(axis=0)
    sum_a_next = traj.a[1:K + 1].sum(axis=0)
    best_a_term = game.domain_a.support(-(A @ sum_b))
    best_b_term = game.domain_b.support(A.T @ sum_a_next)
    return _half_step_sum(traj, K) + best_a_term + best_b_term


def verify_gap_regret_identity(game: GameInstance, traj: GameTrajectory, K: Optional[int] = None) -> float:
    """|dg_K - (R_K / K - (a_0^T A b_0 - a_K^T A b_K) / (2K))| with alternating averages."""
    K = traj.K if K is None else K
    if K < 1:
        raise ValueError("K must be at least 1")
    A = game.A
    lhs = average_iterate_gap(game, traj, K, convention="alternating")
    boundary = traj.a[0] @ A @ traj.b[0] - traj.a[K] @ A @ traj.b[K]
    rhs = total_regret(game, traj, K) / K - boundary / (2 * K)
    return float(abs(lhs - rhs))


# ---------------------------------------------------------------------------
# the Bregman / modified-Hamiltonian regret formula

def modified_hamiltonian_first_order(game: GameInstance, x, y, eta: float) -> float:
    """f(x) + g(y) - (eta/2) grad f(x)^T A grad g(y)."""
    return float(game.f(x) + game.g(y) - 0.5 * eta * game.grad_f(x) @ game.A @ game.grad_g(y))


def _bregman_h(game: GameInstance, x0, y0, x, y) -> float:
    """D_H((x0, y0), (x, y)) for H = f + g."""
    dfx = game.f(x0) - game.f(x) - game.grad_f(x) @ (np.asarray(x0) - x)
    dgy = game.g(y0) - game.g(y) - game.grad_g(y) @ (np.asarray(y0) - y)
    return float(dfx + dgy)


def regret_formula_rhs(game: GameInstance, traj: GameTrajectory, comparator_dual: DualPoint,
                K: Optional[int] = None) -> float:
    """(1/eta)(D_H(zeta_0, zeta) - D_H(zeta_K, zeta) + Ht1(zeta_K) - Ht1(zeta_0))."""
    K = traj.K if K is None else K
    eta = traj.eta
    x, y = comparator_dual.x, comparator_dual.y
    d0 = _bregman_h(game, traj.x[0], traj.y[0], x, y)
    dK = _bregman_h(game, traj.x[K], traj.y[K], x, y)
    h0 = modified_hamiltonian_first_order(game, traj.x[0], traj.y[0], eta)
    hK = modified_hamiltonian_first_order(game, traj.x[K], traj.y[K], eta)
    return (d0 - dK + hK - h0) / eta


def regret_formula_residual(game: GameInstance, traj: GameTrajectory, comparator: StrategyPair,
                     K: Optional[int] = None) -> float:
    """Relative residual |lhs - rhs| / max(1, |lhs|) of the regret formula.

    The comparator is mapped to dual coordinates with the mirror map; its
    image under the conjugate gradient is what enters the formula, so that
    image is used for the left side as well.
    """
    K = traj.K if K is None else K
    zeta = DualPoint.from_primal(game, comparator)
    mapped = zeta.to_primal(game)
    lhs = cumulative_regret(game, traj, mapped, K)
    rhs = regret_formula_rhs(game, traj, zeta, K)
    return abs(lhs - rhs) / max(1.0, abs(lhs))


def regret_formula_residual_pq(game: GameInstance, traj: GameTrajectory, comparator: StrategyPair,
                        K: Optional[int] = None) -> float:
    """Same identity with the first-order modified Hamiltonian evaluated in (p, q).

    Needs the symmetric factorisation A = U V with U invertible; the
    truncated modified Hamiltonian of F(p) = f(U p), G(q) = g(V q) then
    equals the dual-coordinate expression at (x, y) = (U p, V q).
    """
    from .mh_symbolic import general_d_truncation_eval

    K = traj.K if K is None else K
    U, V = game.payoff.factors()
    H = pushforward_hamiltonian(game)
    U_inv, V_inv = np.linalg.inv(U), np.linalg.inv(V)
    eta = traj.eta

    def ht1(x, y):
        return general_d_truncation_eval(H, PhasePoint(U_inv @ x, V_inv @ y), eta, 1)

    zeta = DualPoint.from_primal(game, comparator)
    d0 = _bregman_h(game, traj.x[0], traj.y[0], zeta.x, zeta.y)
    dK = _bregman_h(game, traj.x[K], traj.y[K], zeta.x, zeta.y)
    rhs = (d0 - dK + ht1(traj.x[K], traj.y[K]) - ht1(traj.x[0], traj.y[0])) / eta
    lhs = cumulative_regret(game, traj, zeta.to_primal(game), K)
    return abs(lhs - rhs) / max(1.0, abs(lhs))


def running_average_gaps(traj: GameTrajectory, convention: str = "synchronous") -> np.ndarray:
    """dg at the average iterates for every K = 1..traj.K (entry K-1)."""
    game = traj.game
    A = game.A
    K = traj.K
    if K < 1:
        return np.empty(0)
    ks = np.arange(1, K + 1)
    ca = np.cumsum(traj.a, axis=0)
    cb = np.cumsum(traj.b, axis=0)
    if convention == "synchronous":
        a_bar, b_bar = ca[ks - 1], cb[ks - 1]
    elif convention == "shifted":
        a_bar, b_bar = ca[ks] - ca[0], cb[ks] - cb[0]
    elif convention == "alternating":
        a_bar, b_bar = ca[ks] - ca[0], cb[ks - 1]
    else:
        raise ValueError(f"convention must be one of {_CONVENTIONS}")
    a_bar = a_bar / ks[:, None]
    b_bar = b_bar / ks[:, None]
    out = np.empty(K)
    for i in range(K):
        out[i] = duality_gap(game, StrategyPair(a_bar[i], b_bar[i]))
    return out


def gap_envelope(game: GameInstance, a0, b0, eta: float, K: int, window: int = 2) -> float:
    """max of dg_{K'} over K <= K' <= window*K at a fixed step size.

    The average-iterate gap oscillates with the orbit of the iterates; the
    maximum over a window tracks the envelope that rate statements describe.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    traj = run_amd(game, a0, b0, eta, window * K)
    gaps = running_average_gaps(traj)
    return float(gaps[K - 1:].max())
