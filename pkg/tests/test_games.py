from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shadowham.cli import fit_loglog
from shadowham.core import DomainViolation, PhasePoint, Regularizer, UnboundedDomain
from shadowham.games import (
    Domain,
    DualPoint,
    GameInstance,
    StrategyPair,
    amd_step,
    average_iterate_gap,
    conjugacy_residual,
    cumulative_regret,
    damd_step,
    duality_gap,
    entropic_simplex_game,
    gap_envelope,
    regret_formula_residual,
    regret_formula_residual_pq,
    pushforward_check,
    quadratic_game,
    random_entropic_game,
    run_amd,
    running_average_gaps,
    skew_gradient_check,
    total_regret,
    verify_gap_regret_identity,
)

ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])
PENNIES = np.array([[1.0, -1.0], [-1.0, 1.0]])
RPS = np.array([[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]])


# -- steps ---------------------------------------------------------------------

def test_amd_zero_step_is_identity():
    game = entropic_simplex_game(ROT)
    pair = StrategyPair([0.3, 0.7], [0.6, 0.4])
    out = amd_step(game, pair, 0.0)
    assert np.array_equal(out.a, pair.a) and np.array_equal(out.b, pair.b)


def test_amd_quadratic_is_gradient_play():
    A = np.array([[1.0, 2.0], [0.5, -1.0]])
    game = quadratic_game(A)
    a, b = np.array([0.2, -0.4]), np.array([1.0, 0.3])
    out = amd_step(game, StrategyPair(a, b), 0.1)
    a1 = a - 0.1 * A @ b
    assert np.allclose(out.a, a1, atol=1e-15)
    assert np.allclose(out.b, b + 0.1 * A.T @ a1, atol=1e-15)


def test_amd_entropic_reference_step():
    # 20-digit references computed with mpmath: softmax of the updated logits
    game = entropic_simplex_game(ROT)
    out = amd_step(game, StrategyPair([0.5, 0.5], [0.5, 0.5]), 0.1)
    expected = [0.47502081252106001390, 0.52497918747893998610]
    assert np.allclose(out.a, expected, rtol=0, atol=1e-15)
    assert np.allclose(out.b, expected, rtol=0, atol=1e-15)
    assert out.a.sum() == pytest.approx(1.0, abs=1e-15)


def test_amd_rejects_boundary_start_on_simplex():
    game = entropic_simplex_game(ROT)
    with pytest.raises(DomainViolation):
        amd_step(game, StrategyPair([1.0, 0.0], [0.5, 0.5]), 0.1)


def test_damd_zero_step_and_agreement_with_amd():
    rng = np.random.default_rng(4)
    game, a0, b0 = random_entropic_game(rng, 4)
    pt = DualPoint.from_primal(game, StrategyPair(a0, b0))
    same = damd_step(game.grad_f, game.grad_g, game.A, pt, 0.0)
    assert np.array_equal(same.x, pt.x) and np.array_equal(same.y, pt.y)
    pair = StrategyPair(a0, b0)
    for _ in range(20):
        pt = damd_step(game.grad_f, game.grad_g, game.A, pt, 0.2)
        pair = amd_step(game, pair, 0.2)
        mapped = pt.to_primal(game)
        assert np.allclose(mapped.a, pair.a, atol=1e-13)
        assert np.allclose(mapped.b, pair.b, atol=1e-13)


def test_conjugacy_residual_along_iterates():
    rng = np.random.default_rng(9)
    game, a0, b0 = random_entropic_game(rng, 3)
    traj = run_amd(game, a0, b0, 0.3, 50)
    for k in range(50):
        assert conjugacy_residual(game, "a", traj.a[k + 1], traj.a[k], traj.b[k], 0.3) <= 1e-12
        assert conjugacy_residual(game, "b", traj.b[k + 1], traj.b[k], traj.a[k + 1], 0.3) <= 1e-12
    with pytest.raises(ValueError):
        conjugacy_residual(game, "c", a0, a0, b0, 0.3)


# -- pushforward -----------------------------------------------------------

@pytest.mark.parametrize("A,tol", [(np.eye(2), 1e-12), (np.diag([2.0, 3.0]), 1e-10),
                                   (np.array([[1.0, 1.0], [0.0, 2.0]]), 1e-10)])
def test_pushforward(A, tol):
    game = quadratic_game(A)
    z0 = PhasePoint([0.5, -0.3], [0.2, 0.9])
    assert pushforward_check(game, z0, 0.1, 0) == 0.0
    assert pushforward_check(game, z0, 0.1, 100) <= tol


def test_skew_gradient_field():
    for A in (np.eye(2), np.diag([2.0, 3.0]), np.array([[1.0, 1.0], [0.0, 2.0]])):
        game = quadratic_game(A)
        assert skew_gradient_check(game, PhasePoint([0.4, 1.0], [-0.7, 0.2])) <= 1e-12


# -- duality gap -------------------------------------------------------------

def test_gap_examples():
    game = entropic_simplex_game(ROT)
    uniform = StrategyPair([0.5, 0.5], [0.5, 0.5])
    # vertex enumeration: max_j (a^T A)_j = 0.5, min_i (A b)_i = -0.5
    assert duality_gap(game, uniform) == pytest.approx(1.0)
    assert duality_gap(game, StrategyPair([0.0, 1.0], [0.0, 1.0])) == 0.0
    assert duality_gap(entropic_simplex_game(np.zeros((2, 2))), uniform) == 0.0
    assert duality_gap(entropic_simplex_game(RPS), StrategyPair(np.ones(3) / 3, np.ones(3) / 3)) \
        == pytest.approx(0.0, abs=1e-15)
    assert duality_gap(entropic_simplex_game(PENNIES), uniform) == 0.0


def test_gap_nonnegative_and_vertex_oracle():
    rng = np.random.default_rng(21)
    for _ in range(1000):
        d = int(rng.integers(2, 5))
        A = rng.normal(size=(d, d))
        game = entropic_simplex_game(A)
        a, b = rng.dirichlet(np.ones(d)), rng.dirichlet(np.ones(d))
        gap = duality_gap(game, StrategyPair(a, b))
        brute = max(a @ A @ e for e in np.eye(d)) - min(e @ A @ b for e in np.eye(d))
        assert gap >= 0.0
        assert gap == pytest.approx(brute, abs=1e-14)


def test_unbounded_domain():
    game = quadratic_game(np.eye(2))
    with pytest.raises(UnboundedDomain):
        duality_gap(game, StrategyPair([0.0, 0.0], [0.0, 0.0]))
    assert Domain.box(2, [-1, -1], [1, 2]).support([1.0, -1.0]) == 2.0


def test_box_game_gap():
    reg = Regularizer.half_squared_norm(1, bounds=([0.0], [1.0]))
    game = GameInstance.build([[1.0]], reg, reg)
    # a^T A b' maximised at b' = 1, a'^T A b minimised at a' = 0
    assert duality_gap(game, StrategyPair([0.5], [0.5])) == pytest.approx(0.5)


# -- averages, regrets and identities -----------------------------------------

def test_average_gap_single_term_and_nash():
    game = entropic_simplex_game(PENNIES)
    a0, b0 = np.array([0.3, 0.7]), np.array([0.6, 0.4])
    traj = run_amd(game, a0, b0, 0.1, 5)
    assert average_iterate_gap(game, traj, 1) == duality_gap(game, StrategyPair(a0, b0))
    nash = run_amd(game, np.array([0.5, 0.5]), np.array([0.5, 0.5]), 0.1, 10)
    assert average_iterate_gap(game, nash) == 0.0
    with pytest.raises(ValueError):
        average_iterate_gap(game, traj, 0)
    with pytest.raises(ValueError):
        average_iterate_gap(game, traj, 3, convention="bogus")


def test_running_gaps_match_pointwise():
    rng = np.random.default_rng(1)
    game, a0, b0 = random_entropic_game(rng, 3)
    traj = run_amd(game, a0, b0, 0.2, 30)
    for conv in ("synchronous", "shifted", "alternating"):
        run = running_average_gaps(traj, conv)
        for K in (1, 7, 30):
            assert run[K - 1] == pytest.approx(average_iterate_gap(game, traj, K, conv), abs=1e-15)


def test_regret_trivial_cases():
    game = entropic_simplex_game(PENNIES)
    traj = run_amd(game, np.array([0.3, 0.7]), np.array([0.6, 0.4]), 0.1, 10)
    comp = StrategyPair([1.0, 0.0], [0.0, 1.0])
    assert cumulative_regret(game, traj, comp, 0) == 0.0
    assert total_regret(game, traj, 0) == 0.0
    zero = entropic_simplex_game(np.zeros((2, 2)))
    ztraj = run_amd(zero, np.array([0.3, 0.7]), np.array([0.6, 0.4]), 0.1, 10)
    assert cumulative_regret(zero, ztraj, comp) == 0.0
    assert total_regret(zero, ztraj) == 0.0


def test_total_regret_is_max_over_comparators():
    rng = np.random.default_rng(3)
    game, a0, b0 = random_entropic_game(rng, 3)
    traj = run_amd(game, a0, b0, 0.2, 40)
    best = total_regret(game, traj)
    vals = [cumulative_regret(game, traj, StrategyPair(ea, eb)) for ea in np.eye(3) for eb in np.eye(3)]
    assert best == pytest.approx(max(vals), abs=1e-13)
    for _ in range(50):
        c = StrategyPair(rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3)))
        assert cumulative_regret(game, traj, c) <= best + 1e-12


def test_gap_regret_identity():
    rng = np.random.default_rng(12)
    game, a0, b0 = random_entropic_game(rng, 3)
    traj = run_amd(game, a0, b0, 0.15, 200)
    assert verify_gap_regret_identity(game, traj, 1) <= 1e-12
    assert verify_gap_regret_identity(game, traj, 200) <= 1e-9
    zero = entropic_simplex_game(np.zeros((3, 3)))
    ztraj = run_amd(zero, a0, b0, 0.15, 20)
    assert verify_gap_regret_identity(zero, ztraj) == 0.0


def test_regret_formula_identity():
    rng = np.random.default_rng(30)
    game, a0, b0 = random_entropic_game(rng, 3)
    traj = run_amd(game, a0, b0, 0.2, 100)
    for _ in range(10):
        comp = StrategyPair(rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3)))
        assert regret_formula_residual(game, traj, comp) <= 1e-9
        assert regret_formula_residual(game, traj, comp, 1) <= 1e-12


def test_regret_formula_in_pq_coordinates():
    game = entropic_simplex_game(np.array([[2.0, 0.5], [0.5, 1.0]]))
    traj = run_amd(game, np.array([0.3, 0.7]), np.array([0.6, 0.4]), 0.1, 50)
    comp = StrategyPair([0.2, 0.8], [0.9, 0.1])
    assert regret_formula_residual_pq(game, traj, comp) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(0, 10_000), st.floats(0.01, 0.5))
def test_identities_property(d, seed, eta):
    rng = np.random.default_rng(seed)
    game, a0, b0 = random_entropic_game(rng, d)
    traj = run_amd(game, a0, b0, eta, 30)
    comp = StrategyPair(rng.dirichlet(np.ones(d)), rng.dirichlet(np.ones(d)))
    assert regret_formula_residual(game, traj, comp) <= 1e-9
    assert verify_gap_regret_identity(game, traj) <= 1e-9


# -- rates -----------------------------------------------------------------

@pytest.mark.parametrize("a0,b0", [((0.3, 0.7), (0.6, 0.4)), ((0.8, 0.2), (0.3, 0.7))])
def test_gap_envelope_rate(a0, b0):
    game = entropic_simplex_game(PENNIES)
    Ks = [100, 1000, 10000]
    env = [gap_envelope(game, np.array(a0), np.array(b0), K ** (-1.0 / 3.0), K) for K in Ks]
    assert env[0] > env[1] > env[2]
    slope, _, degenerate = fit_loglog(Ks, env)
    assert not degenerate and slope <= -0.6


# -- CSV ---------------------------------------------------------------------

def test_trajectory_csv():
    game = entropic_simplex_game(PENNIES)
    traj = run_amd(game, np.array([0.3, 0.7]), np.array([0.6, 0.4]), 0.1, 3)
    lines = traj.to_csv().splitlines()
    assert lines[0] == "step,a_0,a_1,b_0,b_1,x_0,x_1,y_0,y_1,gap,running_avg_gap"
    assert len(lines) == 5
    empty = run_amd(game, np.array([0.3, 0.7]), np.array([0.6, 0.4]), 0.1, 0)
    assert len(empty.to_csv().splitlines()) == 2
