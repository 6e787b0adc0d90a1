import math

import numpy as np
from hypothesis import given, strategies as st

from purex.core import Observation, build_instance, sample_step
from purex.estimation import EstimatorState, confidence_radius, pessimistic_matrix, rho_radius, update

from conftest import SETUP1_A, SETUP1_HARD


def _obs(arm, reward, cost=()):
    return Observation(t=0, arm=arm, reward=reward, cost=np.asarray(cost, dtype=float))


def test_single_ridge_update():
    s = update(EstimatorState(K=2, d=0), _obs(0, 2.0))
    np.testing.assert_allclose(s.mu_hat, [1.0, 0.0])
    assert s.t == 1 and s.counts.tolist() == [1, 0]


def test_cost_shrinkage_after_one_pull():
    s = update(EstimatorState(K=7, d=2), _obs(0, 0.0, SETUP1_A[:, 0]))
    np.testing.assert_allclose(s.A_hat[:, 0], SETUP1_A[:, 0] / 2)


def test_zero_noise_ridge_mean():
    inst = build_instance(SETUP1_HARD, 0.0, SETUP1_A, cost_noise_sd=0.0)
    s = EstimatorState(K=7, d=2)
    rng = np.random.default_rng(0)
    for _ in range(100):
        for a in range(7):
            update(s, sample_step(inst, a, rng))
    N = s.counts
    assert np.max(np.abs(s.mu_hat - inst.means * N / (N + 1))) <= 1e-12


def test_radius_identity_design():
    s = EstimatorState(K=4, d=1)
    assert math.isclose(confidence_radius(s, 0.05), 1 + math.sqrt(0.5 * math.log(4 / 0.05)))


def test_radius_worked_value():
    s = EstimatorState(K=2, d=0, counts=np.array([1, 0]))
    f = confidence_radius(s, 0.1)
    assert math.isclose(f, 1 + math.sqrt(0.5 * math.log(20) + 0.25 * math.log(2)), rel_tol=1e-12)
    assert abs(f - 2.2927) < 1e-4


@given(st.lists(st.integers(0, 500), min_size=2, max_size=6), st.integers(0, 5), st.integers(1, 50))
def test_radius_nondecreasing(counts, arm, extra):
    c = np.array(counts)
    arm %= c.size
    s1 = EstimatorState(K=c.size, d=0, counts=c.copy())
    c[arm] += extra
    s2 = EstimatorState(K=c.size, d=0, counts=c)
    assert confidence_radius(s2, 0.1) >= confidence_radius(s1, 0.1)


def test_forced_zero_radius_is_no_pessimism():
    s = EstimatorState(K=3, d=2, counts=np.array([3, 1, 2]), cost_sums=np.arange(6.0).reshape(2, 3))
    m = pessimistic_matrix(s, 0.1, radius=0.0)
    np.testing.assert_array_equal(m.A_tilde, m.A_hat)


def test_uniform_shift_from_zero():
    s = EstimatorState(K=3, d=2)
    m = pessimistic_matrix(s, 0.1, radius=1.0)
    np.testing.assert_array_equal(m.A_tilde, -np.ones((2, 3)))


@given(st.integers(0, 10_000), st.integers(0, 4))
def test_single_coordinate_shift(seed, a):
    rng = np.random.default_rng(seed)
    counts = rng.integers(0, 50, 5)
    s = EstimatorState(K=5, d=3, counts=counts, cost_sums=rng.normal(size=(3, 5)))
    m = pessimistic_matrix(s, 0.05)
    e = np.eye(5)[a]
    np.testing.assert_allclose(m.A_tilde @ e, m.A_hat @ e - m.f_radius / math.sqrt(1 + counts[a]), atol=1e-14)
    assert np.all(m.A_tilde <= m.A_hat)


def test_rho_basis_and_uniform():
    s = EstimatorState(K=4, d=0, counts=np.array([9, 9, 9, 9]))
    f = confidence_radius(s, 0.1)
    assert math.isclose(rho_radius(s, 0.1, np.eye(4)[2]), f / math.sqrt(10))
    assert math.isclose(rho_radius(s, 0.1, np.full(4, 0.25)), f / math.sqrt(4 * 10))


@given(st.integers(0, 10_000))
def test_rho_nonincreasing_in_counts(seed):
    rng = np.random.default_rng(seed)
    c = rng.integers(0, 30, 4)
    w = rng.dirichlet(np.ones(4))
    s1 = EstimatorState(K=4, d=0, counts=c.copy())
    c[rng.integers(4)] += 5
    s2 = EstimatorState(K=4, d=0, counts=c)
    assert rho_radius(s2, 0.1, w, radius=2.0) <= rho_radius(s1, 0.1, w, radius=2.0)


def test_consistency_with_noiseless_costs():
    inst = build_instance(SETUP1_HARD, 1.0, SETUP1_A, cost_noise_sd=0.0)
    rng = np.random.default_rng(1)
    s = EstimatorState(K=7, d=2)
    gaps = []
    for n in (10, 100, 1000):
        while s.counts.min() < n:
            for a in range(7):
                update(s, sample_step(inst, a, rng))
        m = pessimistic_matrix(s, 0.05)
        gaps.append(np.max(np.abs(m.A_tilde - inst.constraints)))
    assert gaps[0] > gaps[1] > gaps[2]
