import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from purex.core import build_instance, sample_step
from purex.gamesolver import confusing_instance, evaluate_D, multiplier_argmin, multiplier_box, pair_terms
from purex.polytope import contains, neighbors, polytope_from_constraints
from purex.samplers import (
    ALGORITHMS,
    RunConfig,
    RunContext,
    TrackingViolation,
    adagrad_step,
    ctrack_next,
    estimated_polytope,
    exploration_g,
    half_width,
    init_state,
    lagex_step,
    lats_step,
    optimistic_losses,
    run,
    run_baseline,
    step,
)
from purex.estimation import pessimistic_matrix

from conftest import PI_STAR_SETUP1, SETUP1_A, SETUP1_EASY


def test_ctrack_examples():
    assert ctrack_next([0, 0], [0.6, 0.4]) == 0
    assert ctrack_next([1, 0], [0.5, 0.5]) == 1
    assert ctrack_next([1, 1], [1.0, 1.0]) == 0


def test_exploration_g_modes():
    assert exploration_g(1) == math.log(3)
    g = math.log(100)
    assert math.isclose(exploration_g(100, "analysis"), 3 * g + math.log(g))


def test_half_width_and_loss_floor():
    assert math.isclose(half_width(1.0, [1], 1.0)[0], math.sqrt(2))
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = rng.integers(1, 100, 4)
        U = optimistic_losses(rng.normal(size=4), rng.normal(size=4), n, 2.0, 1.0)
        assert np.all(U >= 2.0 / n)


def test_adagrad_step_stays_on_simplex():
    w, acc = adagrad_step(np.full(3, 1 / 3), [5.0, -1.0, 0.0], np.zeros(3), Q=2.0)
    assert abs(w.sum() - 1) < 1e-12 and w.min() >= 0
    np.testing.assert_allclose(acc, [4.0, 1.0, 0.0])


def test_initialisation_pulls_each_arm_once(setup1_hard):
    ctx = RunContext("lats", setup1_hard, 0)
    state = init_state(ctx)
    assert state.counts.tolist() == [1.0] * 7 and state.t == 7
    np.testing.assert_array_equal(state.omega, np.full(7, 1 / 7))


def test_step_wrappers_check_algorithm(setup1_hard):
    ctx = RunContext("lats", setup1_hard, 0)
    state = init_state(ctx)
    lats_step(state, ctx)
    assert state.t == 8
    with pytest.raises(ValueError):
        lagex_step(state, ctx)


def test_unknown_algorithm():
    with pytest.raises(ValueError):
        RunContext("nope", build_instance([1.0, 0.0]), 0)
    with pytest.raises(ValueError):
        run_baseline("lats", build_instance([1.0, 0.0]), 0)


def test_noise_stream_matches_sample_step(setup1_hard):
    """The compiled loop reads the same normal draws, in the same order, as sample_step."""
    ctx = RunContext("uniform", setup1_hard, 11)
    state = init_state(ctx)
    rng = np.random.default_rng(11)
    rewards = np.zeros(7)
    costs = np.zeros((2, 7))
    for a in range(7):
        obs = sample_step(setup1_hard, a, rng)
        rewards[a] += obs.reward
        costs[:, a] += obs.cost
    for _ in range(5000):
        before = state.counts.copy()
        step(state, ctx)
        if state.stopped:
            break
        arm = int(np.flatnonzero(state.counts != before)[0])
        obs = sample_step(setup1_hard, arm, rng)
        rewards[arm] += obs.reward
        costs[:, arm] += obs.cost
    np.testing.assert_array_equal(state.reward_sums, rewards)
    np.testing.assert_array_equal(state.cost_sums, costs)


def test_lagex_first_update_matches_reference(setup1_hard):
    cfg = RunConfig()
    ctx = RunContext("lagex", setup1_hard, 3, cfg)
    state = init_state(ctx)
    poly = estimated_polytope(state, ctx)
    A_til = pessimistic_matrix(state.estimator, setup1_hard.delta).A_tilde
    mu0 = state.reward_sums / (1 + state.counts)
    _, top, _ = evaluate_D(state.counts, mu0, poly, setup1_hard.r, 1.0)
    omega = state.omega.copy()
    nb = neighbors(poly, top)
    D0 = pair_terms(mu0, omega, poly.vertices[top], poly.vertices[nb], setup1_hard.r, 1.0).min()
    l = multiplier_argmin(A_til, omega, multiplier_box(D0, A_til, omega))
    step(state, ctx)
    assert not state.stopped
    # the first tracked target is the uniform start
    np.testing.assert_array_equal(state.target, np.full(7, 1 / 7))
    np.testing.assert_allclose(state.multiplier, l, atol=1e-12)
    mu1 = state.reward_sums / (1 + state.counts)
    g = math.log(max(state.t, 3))
    terms = pair_terms(mu1, omega, poly.vertices[top], poly.vertices[nb], setup1_hard.r, 1.0)
    lam, _ = confusing_instance(mu1, omega, poly.vertices[top], poly.vertices[nb[int(np.argmin(terms))]],
                                setup1_hard.r, 1.0)
    U = optimistic_losses(mu1, lam, state.counts, g, 1.0)
    w, acc = adagrad_step(omega, U - A_til.T @ l, np.zeros(7), cfg.eta, cfg.adagrad_eps, ctx.Q)
    np.testing.assert_allclose(state.adagrad_sq, acc, rtol=1e-12)
    np.testing.assert_allclose(state.omega, w, atol=1e-12)


@pytest.mark.parametrize("alg", ["lats", "ctns"])
def test_zero_noise_recommends_optimum(alg, setup1_hard_zero_noise):
    rec = run(alg, setup1_hard_zero_noise, 0)
    assert not rec.censored
    # the recommended vertex of the estimated set, re-solved on its tight rows with the true constraints
    np.testing.assert_allclose(rec.identified_policy, PI_STAR_SETUP1, atol=1e-9)
    assert set(np.flatnonzero(np.array(rec.recommendation) > 1e-12)) == {0, 3}


def test_zero_noise_easy_is_correct_and_feasible():
    inst = build_instance(SETUP1_EASY, 0.0, SETUP1_A, cost_noise_sd=0.0, delta=0.01)
    for alg in ("lats", "lagex"):
        rec = run(alg, inst, 0)
        assert rec.correct and rec.feasible


@pytest.mark.parametrize("alg", ALGORITHMS)
def test_tracking_bound_every_step(alg, setup1_hard):
    ctx = RunContext(alg, setup1_hard, 5, RunConfig(horizon=3000))
    state = init_state(ctx)
    while not state.stopped and state.t < 600:
        step(state, ctx)
        dev = np.max(np.abs(state.counts - state.cum_alloc))
        assert dev <= 7 * (1 + math.sqrt(state.t))
        assert abs(state.cum_alloc.sum() - state.t) < 1e-6
        assert np.all(state.adagrad_sq >= 0)


def test_tracking_violation_is_raised(setup1_hard, monkeypatch):
    import purex._engine as eng

    ctx = RunContext("uniform", setup1_hard, 0)
    state = init_state(ctx)
    state.cum_alloc[0] += 100.0  # corrupt the tracked sum
    with pytest.raises(TrackingViolation):
        step(state, ctx)


def test_uniform_round_robin():
    inst = build_instance([1.0, 0.9, 0.8, 0.7], delta=0.01)
    ctx = RunContext("uniform", inst, 0, RunConfig(forced_exploration=False))
    state = init_state(ctx)
    for _ in range(400):
        step(state, ctx)
        if state.stopped:
            break
        assert np.all(np.abs(state.counts - state.t / 4) <= 1)


def test_ptns_target_in_estimated_set(setup1_hard):
    ctx = RunContext("ptns", setup1_hard, 2)
    state = init_state(ctx)
    for _ in range(200):
        poly = estimated_polytope(state, ctx)
        step(state, ctx)
        if state.stopped:
            break
        assert contains(poly, state.target, tol=1e-7)


@pytest.mark.parametrize("alg", ["ctns", "cge"])
def test_known_constraint_targets_are_feasible(alg, setup1_hard):
    rec = run(alg, setup1_hard, 1, RunConfig(horizon=2000))
    assert rec.cum_violation <= 1e-7 * rec.tau


def test_horizon_equal_to_K_censors(setup1_hard):
    rec = run("lats", setup1_hard, 0, RunConfig(horizon=7))
    assert rec.censored and rec.tau == 7


def test_horizon_below_K_rejected(setup1_hard):
    with pytest.raises(ValueError):
        run("lats", setup1_hard, 0, RunConfig(horizon=3))


@pytest.mark.parametrize("alg", ["lats", "lagex", "ptns"])
def test_same_seed_same_record(alg, setup1_hard):
    cfg = RunConfig(horizon=20_000, log_every=500)
    assert run(alg, setup1_hard, 4, cfg) == run(alg, setup1_hard, 4, cfg)


def test_stop_means_statistic_above_threshold(setup1_hard):
    rec = run("lagex", setup1_hard, 6)
    assert not rec.censored
    assert rec.final_stat > rec.final_threshold
    assert rec.tau >= 7
    assert abs(sum(rec.recommendation) - 1) < 1e-9


def test_violation_log_nondecreasing(setup1_hard):
    rec = run("lagex", setup1_hard, 0, RunConfig(horizon=5000, log_every=50))
    viol = [row[4] for row in rec.log]
    assert len(viol) > 10 and all(b >= a for a, b in zip(viol, viol[1:]))


def test_config_validation():
    for bad in (dict(threshold="x"), dict(refresh_every=0), dict(g_mode="x"), dict(sigma2=0.0),
                dict(lats_domain="x"), dict(violation_on="x")):
        with pytest.raises(ValueError):
            RunConfig(**bad)


def test_refresh_every_and_empirical_violation_run(setup1_hard):
    rec = run("lats", setup1_hard, 0, RunConfig(refresh_every=10, violation_on="empirical"))
    assert rec.tau >= 7 and rec.cum_violation >= 0


def test_theoretical_threshold_stops_later(setup1_hard):
    prac = run("lagex", setup1_hard, 0)
    theo = run("lagex", setup1_hard, 0, RunConfig(threshold="theoretical", horizon=400_000))
    assert theo.tau > prac.tau
