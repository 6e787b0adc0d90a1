import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from purex.core import homogenize
from purex.polytope import (
    InfeasiblePolytope,
    argmax_linear,
    constraint_rows,
    contains,
    enumerate_vertices,
    neighbors,
    polytope_from_constraints,
    project,
    project_simplex,
    r_good_vertices,
    simplex_polytope,
)

from conftest import PI_STAR_SETUP1, SETUP1_A, SETUP1_HARD


def _brute_vertices(G, h):
    """Oracle: solve every (K-1)-row subset with numpy lstsq, keep feasible, dedupe."""
    m, K = G.shape
    out = []
    for sub in itertools.combinations(range(m), K - 1):
        M = np.vstack([G[list(sub)], np.ones(K)])
        if np.linalg.matrix_rank(M) < K:
            continue
        x = np.linalg.solve(M, np.append(h[list(sub)], 1.0))
        if np.all(G @ x <= h + 1e-9) and not any(np.allclose(x, y, atol=1e-7) for y in out):
            out.append(x)
    return np.array(out)


def _same_set(X, Y, tol=1e-7):
    return len(X) == len(Y) and all(np.min(np.max(np.abs(Y - x), axis=1)) < tol for x in X)


def test_simplex_vertices_and_adjacency():
    p = simplex_polytope(3)
    assert _same_set(p.vertices, np.eye(3))
    for i in range(3):
        assert sorted(neighbors(p, i).tolist()) == sorted(set(range(3)) - {i})


def test_single_cap_row():
    p = polytope_from_constraints(homogenize([1, 0, 0], 0.5)[None, :])
    expected = np.array([[0, 1, 0], [0, 0, 1], [0.5, 0.5, 0], [0.5, 0, 0.5]])
    assert _same_set(p.vertices, expected)


def test_setup1_contains_optimum_vertex():
    p = polytope_from_constraints(SETUP1_A)
    assert np.min(np.max(np.abs(p.vertices - PI_STAR_SETUP1), axis=1)) < 1e-9


@given(st.integers(3, 6), st.integers(1, 3), st.integers(0, 100_000))
def test_enumeration_matches_brute_force(K, d, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, (d, K))
    A[:, 0] = -np.abs(A[:, 0]) - 0.1  # keep e_1 strictly feasible
    G, h = constraint_rows(A)
    fast = polytope_from_constraints(A)
    general = enumerate_vertices(G, h)
    oracle = _brute_vertices(G, h)
    assert _same_set(fast.vertices, oracle)
    assert _same_set(general.vertices, oracle)


@given(st.integers(3, 6), st.integers(1, 3), st.integers(0, 100_000))
def test_adjacency_symmetric_and_overlapping(K, d, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, (d, K))
    A[:, 0] = -np.abs(A[:, 0]) - 0.1
    p = polytope_from_constraints(A)
    for i in range(p.n_vertices):
        assert np.all(p.G @ p.vertices[i] <= p.h + 1e-9)
        assert abs(p.vertices[i].sum() - 1) <= 1e-9
        for j in neighbors(p, i):
            assert i in neighbors(p, j)
            assert np.sum(p.active[i] & p.active[j]) >= K - 2


def test_empty_polytope_raises():
    with pytest.raises(InfeasiblePolytope):
        polytope_from_constraints(homogenize([-1, 0, 0], -2.0)[None, :])


def test_too_many_arms():
    with pytest.raises(ValueError):
        polytope_from_constraints(np.zeros((0, 17)))


def test_argmax_on_simplex():
    pi, val = argmax_linear(simplex_polytope(7), np.array(SETUP1_HARD))
    np.testing.assert_array_equal(pi, np.eye(7)[0])
    assert val == 1.5


def test_argmax_setup1():
    pi, val = argmax_linear(polytope_from_constraints(SETUP1_A), np.array(SETUP1_HARD))
    np.testing.assert_allclose(pi, PI_STAR_SETUP1, atol=1e-12)
    assert abs(val - 0.95) < 1e-12


def test_argmax_imdb():
    means = np.array([3.67, 2.97, 2.94, 3.52, 3.18, 2.02, 2.79, 2.96, 2.37, 2.53, 2.55, 2.54])
    e = np.eye(12)
    A = np.vstack([homogenize(e[0] + e[3], 0.3), -homogenize(e[1], 0.3), -homogenize(e[4], 0.3)])
    pi, _ = argmax_linear(polytope_from_constraints(A), means)
    expected = np.zeros(12)
    expected[[0, 1, 4]] = [0.3, 0.3, 0.4]
    np.testing.assert_allclose(pi, expected, atol=1e-12)


def test_argmax_ties_lowest_index():
    p = simplex_polytope(3)
    i = int(np.argmax(p.vertices @ np.array([1.0, 1.0, 0.0])))
    pi, _ = argmax_linear(p, np.array([1.0, 1.0, 0.0]))
    np.testing.assert_array_equal(pi, p.vertices[i])


def test_r_good_sets():
    p = polytope_from_constraints(SETUP1_A)
    mu = np.array(SETUP1_HARD)
    assert r_good_vertices(p, mu, 0.0).size == 1
    idx = r_good_vertices(p, mu, 0.01)
    assert idx.size == 1
    np.testing.assert_allclose(p.vertices[idx[0]], PI_STAR_SETUP1, atol=1e-12)
    vals = p.vertices @ mu
    assert r_good_vertices(p, mu, vals.max() - vals.min()).size == p.n_vertices


def test_project_examples():
    p = polytope_from_constraints(homogenize([1, 0, 0], 0.5)[None, :])
    x, ok = project(p, np.array([0.2, 0.3, 0.5]))
    assert ok
    np.testing.assert_array_equal(x, [0.2, 0.3, 0.5])
    x, ok = project(simplex_polytope(2), np.array([2.0, 0.0]))
    np.testing.assert_allclose(x, [1, 0])
    x, ok = project(p, np.eye(3)[0])
    assert ok
    np.testing.assert_allclose(x, [0.5, 0.25, 0.25], atol=1e-7)


def _qp_oracle(p, x):
    from scipy.optimize import minimize

    cons = [{"type": "ineq", "fun": lambda y: p.h - p.G @ y}, {"type": "eq", "fun": lambda y: y.sum() - 1}]
    res = minimize(lambda y: np.sum((y - x) ** 2), np.full(p.K, 1 / p.K), constraints=cons, method="SLSQP",
                   options={"ftol": 1e-14, "maxiter": 500})
    return res.x


@given(st.integers(0, 100_000))
def test_project_matches_qp(seed):
    rng = np.random.default_rng(seed)
    p = polytope_from_constraints(SETUP1_A)
    x = rng.normal(0.2, 0.5, 7)
    y, ok = project(p, x)
    assert contains(p, y, tol=1e-7)
    z = _qp_oracle(p, x)
    assert np.sum((y - x) ** 2) <= np.sum((z - x) ** 2) + 1e-6


def test_contains_examples():
    p = polytope_from_constraints(homogenize([1, 0, 0], 0.5)[None, :])
    assert all(contains(p, v) for v in p.vertices)
    assert not contains(p, np.eye(3)[0])
    assert contains(p, 0.5 * (p.vertices[0] + p.vertices[-1]))


def test_vertices_dominate_random_feasible_points():
    p = polytope_from_constraints(SETUP1_A)
    rng = np.random.default_rng(0)
    c = rng.normal(size=7)
    _, best = argmax_linear(p, c)
    # random convex combinations of vertices cover the polytope
    W = rng.dirichlet(np.ones(p.n_vertices) * 0.3, size=10_000)
    pts = W @ p.vertices
    assert np.max(pts @ c) <= best + 1e-6
    assert all(contains(p, q, tol=1e-9) for q in pts[:200])


@given(st.integers(0, 100_000), st.floats(0.0, 0.5))
def test_relaxed_rows_give_superset(seed, relax):
    rng = np.random.default_rng(seed)
    A = rng.uniform(-1, 1, (2, 5))
    A[:, 0] = -np.abs(A[:, 0]) - 0.1
    small = polytope_from_constraints(A)
    big = polytope_from_constraints(A - relax)
    assert all(contains(big, v, tol=1e-9) for v in small.vertices)


def test_project_simplex_matches_sort_free_oracle():
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = rng.normal(size=5)
        y = project_simplex(x)
        # KKT: y = max(x - theta, 0) with sum 1, found by bisection
        lo, hi = x.min() - 1, x.max()
        for _ in range(200):
            mid = (lo + hi) / 2
            lo, hi = (mid, hi) if np.maximum(x - mid, 0).sum() > 1 else (lo, mid)
        np.testing.assert_allclose(y, np.maximum(x - lo, 0), atol=1e-9)
