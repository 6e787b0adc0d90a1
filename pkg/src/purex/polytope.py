"""Vertex and edge enumeration for policy polytopes, plus linear maximisation and projection.

A polytope is ``{pi : G pi <= h, sum(pi) = 1}`` where ``G`` carries the
constraint rows followed by the ``-pi_a <= 0`` rows.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from . import _kernels as _k

MAX_ARMS = 16
FEAS_TOL = 1e-9
DEDUP_TOL = 1e-7
ACTIVE_TOL = 1e-9


class InfeasiblePolytope(ValueError):
    pass


class DegenerateGeometry(ValueError):
    pass


@dataclass(frozen=True)
class FeasiblePolytope:
    G: np.ndarray
    h: np.ndarray
    vertices: np.ndarray
    active: np.ndarray
    adjacency: tuple
    n_constraints: int = 0

    @property
    def K(self) -> int:
        return self.G.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]


def simplex_rows(K: int) -> tuple[np.ndarray, np.ndarray]:
    return -np.eye(K), np.zeros(K)


def constraint_rows(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stack ``A pi <= 0`` on top of the non-negativity rows."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    K = A.shape[1]
    Gs, hs = simplex_rows(K)
    return np.vstack([A, Gs]), np.concatenate([np.zeros(A.shape[0]), hs])


@lru_cache(maxsize=64)
def _combos(m: int, k: int) -> np.ndarray:
    c = np.array(list(itertools.combinations(range(m), k)), dtype=np.int64)
    return c.reshape(-1, k)


def enumerate_vertices(
    G: np.ndarray, h: np.ndarray, n_constraints: Optional[int] = None, with_adjacency: bool = True
) -> FeasiblePolytope:
    """Enumerate basic feasible solutions of ``{G pi <= h, sum(pi) = 1}``.

    Every (K-1)-subset of rows is solved together with the simplex equality.
    Two vertices are adjacent when their common tight rows, together with
    the equality, pin down a line.  With ``with_adjacency=False`` the
    adjacency tuple is left empty; use :func:`neighbors` on demand.
    """
    G = np.ascontiguousarray(G, dtype=float)
    h = np.ascontiguousarray(h, dtype=float)
    m, K = G.shape
    if K > MAX_ARMS:
        raise ValueError(f"vertex enumeration supports K <= {MAX_ARMS}, got K={K}")
    if n_constraints is None:
        n_constraints = m
    V = _k.basic_solutions(G, h, _combos(m, K - 1), FEAS_TOL, DEDUP_TOL)
    if V.shape[0] == 0:
        raise InfeasiblePolytope("polytope is empty")
    active = _k.active_mask(V, G, h, ACTIVE_TOL)
    adj = tuple(_k.neighbors_of(i, active, G) for i in range(V.shape[0])) if with_adjacency else ()
    V.setflags(write=False)
    return FeasiblePolytope(G=G, h=h, vertices=V, active=active, adjacency=adj, n_constraints=int(n_constraints))


def neighbors(poly: FeasiblePolytope, i: int) -> np.ndarray:
    if poly.adjacency:
        return poly.adjacency[i]
    return _k.neighbors_of(int(i), poly.active, poly.G)


def polytope_from_constraints(A: np.ndarray, with_adjacency: bool = True) -> FeasiblePolytope:
    """Polytope ``{A pi <= 0, pi >= 0, sum(pi) = 1}``.

    Same result as :func:`enumerate_vertices` on the stacked rows, with the
    bases solved on their free coordinates only.
    """
    A = np.ascontiguousarray(np.atleast_2d(np.asarray(A, dtype=float)))
    K = A.shape[1]
    if K > MAX_ARMS:
        raise ValueError(f"vertex enumeration supports K <= {MAX_ARMS}, got K={K}")
    G = _k.stacked_rows(A)
    h = np.zeros(G.shape[0])
    V = _k.homogeneous_vertices(A, FEAS_TOL, DEDUP_TOL)
    if V.shape[0] == 0:
        raise InfeasiblePolytope("polytope is empty")
    active = _k.active_mask(V, G, h, ACTIVE_TOL)
    adj = tuple(_k.neighbors_of(i, active, G) for i in range(V.shape[0])) if with_adjacency else ()
    V.setflags(write=False)
    return FeasiblePolytope(G=G, h=h, vertices=V, active=active, adjacency=adj, n_constraints=A.shape[0])


@lru_cache(maxsize=32)
def simplex_polytope(K: int) -> FeasiblePolytope:
    return polytope_from_constraints(np.zeros((0, K)))


class PolytopeCache:
    """Re-enumerate only when the constraint matrix moves by more than ``tol``."""

    def __init__(self, tol: float = 1e-9):
        self.tol = tol
        self._A = None
        self._poly = None

    def get(self, A: np.ndarray) -> FeasiblePolytope:
        if self._A is not None and self._A.shape == A.shape and np.max(np.abs(self._A - A), initial=0.0) <= self.tol:
            return self._poly
        poly = polytope_from_constraints(A)
        self._A = np.array(A, copy=True)
        self._poly = poly
        return poly


def vertex_values(poly: FeasiblePolytope, c: np.ndarray) -> np.ndarray:
    return poly.vertices @ np.asarray(c, dtype=float)


def best_vertex(poly: FeasiblePolytope, c: np.ndarray) -> int:
    # np.argmax returns the first maximiser: lowest-index tie-breaking
    return int(np.argmax(vertex_values(poly, c)))


def argmax_linear(poly: FeasiblePolytope, c: np.ndarray) -> tuple[np.ndarray, float]:
    vals = vertex_values(poly, c)
    i = int(np.argmax(vals))
    return poly.vertices[i].copy(), float(vals[i])


def r_good_vertices(poly: FeasiblePolytope, means: np.ndarray, r: float) -> np.ndarray:
    vals = vertex_values(poly, means)
    return np.flatnonzero(vals + r >= vals.max() - 1e-12)


def contains(poly: FeasiblePolytope, pi: np.ndarray, tol: float = 1e-9) -> bool:
    pi = np.asarray(pi, dtype=float)
    return bool(np.all(poly.G @ pi <= poly.h + tol) and abs(pi.sum() - 1.0) <= tol)


def project_simplex(x: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    x = np.asarray(x, dtype=float)
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, x.shape[0] + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(x - theta, 0.0)


def _halfspace_rows(poly: FeasiblePolytope) -> tuple[np.ndarray, np.ndarray]:
    """Rows not already implied by the simplex (drop ``-pi_a <= 0``)."""
    G, h = poly.G, poly.h
    keep = []
    for i in range(G.shape[0]):
        row = G[i]
        nz = np.flatnonzero(row)
        if h[i] == 0.0 and nz.size == 1 and row[nz[0]] < 0:
            continue
        keep.append(i)
    return G[keep], h[keep]


def project(
    poly: FeasiblePolytope, x: np.ndarray, max_iter: int = 2000, tol: float = 1e-8
) -> tuple[np.ndarray, bool]:
    """Euclidean projection by Dykstra's alternating projections.

    Alternates between the simplex and each constraint halfspace. Returns the
    projected point and whether the iteration converged; without convergence
    the least-violating iterate seen is returned.
    """
    x = np.asarray(x, dtype=float).copy()
    Gc, hc = _halfspace_rows(poly)
    if contains(poly, x, tol=1e-12):
        return x, True
    if Gc.shape[0] == 0:
        return project_simplex(x), True
    norms2 = np.sum(Gc**2, axis=1)
    n_sets = Gc.shape[0] + 1
    incr = np.zeros((n_sets, x.shape[0]))
    best, best_viol = None, np.inf
    for _ in range(max_iter):
        x_old = x
        z = x + incr[0]
        y = project_simplex(z)
        incr[0] = z - y
        x = y
        for i in range(Gc.shape[0]):
            z = x + incr[i + 1]
            excess = Gc[i] @ z - hc[i]
            y = z - (excess / norms2[i]) * Gc[i] if excess > 0 and norms2[i] > 0 else z
            incr[i + 1] = z - y
            x = y
        viol = max(float(np.max(Gc @ x - hc, initial=0.0)), abs(x.sum() - 1.0), float(np.max(-x, initial=0.0)))
        if viol < best_viol:
            best, best_viol = x.copy(), viol
        # a cycle can leave x unchanged before the increments settle
        if np.linalg.norm(x - x_old) < tol and viol <= tol:
            return x, True
    return best, False


def counterpart_vertex(poly: FeasiblePolytope, idx: int, G_true: np.ndarray, h_true: np.ndarray) -> Optional[np.ndarray]:
    """Re-solve the tight rows of vertex ``idx`` with another row system.

    The row order of ``G_true`` must match ``poly.G``. Returns the solution of
    the first nonsingular (K-1)-subset of the tight rows, or ``None``.
    """
    K = poly.K
    tight = np.flatnonzero(poly.active[idx])
    for sub in itertools.combinations(tight, K - 1):
        sub = list(sub)
        M = np.vstack([G_true[sub], np.ones((1, K))])
        if np.linalg.matrix_rank(M, tol=1e-10) < K:
            continue
        return np.linalg.solve(M, np.concatenate([h_true[sub], [1.0]]))
    return None
