"""Gaussian lower-bound game: confusing instances, game value, multipliers.

Every quantity is built from one closed form.  For a pair of vertices
``pi, pi'`` with ``v = pi - pi'`` and weights ``w``, the cheapest Gaussian
instance on the hyperplane ``lambda @ v = r`` costs

    [(mu @ v - r)_+]^2 / (2 sigma2 * sum_a v_a^2 / w_a)

in weighted KL.  The game value takes the max over r-good vertices of the
min over their neighbours, minus the Lagrangian penalty ``l @ A_tilde @ w``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as _k
from .polytope import (
    DegenerateGeometry,
    FeasiblePolytope,
    neighbors,
    r_good_vertices,
    simplex_polytope,
)

B_MAX = 100.0


@dataclass(frozen=True)
class BoundedMeanBox:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("BoundedMeanBox needs lo < hi")

    def loss_bound(self, sigma2: float) -> float:
        return (self.hi - self.lo) ** 2 / (2.0 * sigma2)

    @classmethod
    def around(cls, means: np.ndarray, margin: float = 1.0) -> "BoundedMeanBox":
        means = np.asarray(means, dtype=float)
        return cls(float(means.min() - margin), float(means.max() + margin))


@dataclass(frozen=True)
class GameSolution:
    omega: np.ndarray
    multiplier: np.ndarray
    value: float
    pi_star: int
    neighbor: int
    lam: Optional[np.ndarray] = None


def gaussian_kl(x, y, sigma2: float):
    return (np.asarray(x) - np.asarray(y)) ** 2 / (2.0 * sigma2)


def _inv_weight_norm(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``sum_a v_a^2 / w_a`` along the last axis, +inf where some w_a = 0 meets v_a != 0."""
    v2 = v**2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(v2 > 0, v2 / w, 0.0)
    return ratio.sum(axis=-1)


def confusing_instance(means, omega, pi, pi_prime, r: float, sigma2: float) -> tuple[np.ndarray, float]:
    """Closest instance (weighted Gaussian KL) on ``lambda @ (pi - pi') = r``.

    Returns ``(lambda, gamma)`` with ``lambda_a = mu_a + gamma v_a sigma2 / w_a``.
    Coordinates with zero weight absorb the whole shift at zero cost; then
    ``gamma`` is reported as 0.
    """
    mu = np.asarray(means, dtype=float)
    w = np.asarray(omega, dtype=float)
    v = np.asarray(pi, dtype=float) - np.asarray(pi_prime, dtype=float)
    if not np.any(v != 0):
        raise ValueError("pi and pi_prime coincide")
    gap = r - mu @ v
    free = (w <= 0) & (v != 0)
    if np.any(free):
        vf = np.where(free, v, 0.0)
        return mu + gap * vf / (vf @ vf), 0.0
    denom = sigma2 * _inv_weight_norm(v, w)
    gamma = gap / denom
    with np.errstate(divide="ignore", invalid="ignore"):
        shift = np.where(v != 0, gamma * v * sigma2 / w, 0.0)
    return mu + shift, float(gamma)


def pair_terms(means, w, pi, neighbors, r: float, sigma2: float) -> np.ndarray:
    """``pair_term`` against every row of ``neighbors`` at once."""
    V = np.asarray(pi, dtype=float)[None, :] - np.atleast_2d(neighbors)
    gap = np.maximum(V @ np.asarray(means, dtype=float) - r, 0.0)
    S = _inv_weight_norm(V, np.asarray(w, dtype=float)[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(np.isfinite(S) & (gap > 0), gap**2 / (2.0 * sigma2 * S), 0.0)
    return out


def pair_term(means, w, pi, pi_prime, r: float, sigma2: float) -> float:
    return float(pair_terms(means, w, pi, np.asarray(pi_prime, dtype=float)[None, :], r, sigma2)[0])


def penalty(multiplier, A_tilde, w) -> float:
    """``l @ A_tilde @ w`` (zero when there are no constraints)."""
    if multiplier is None or A_tilde is None or np.size(A_tilde) == 0:
        return 0.0
    return float(np.asarray(multiplier) @ (np.asarray(A_tilde) @ np.asarray(w)))


def inner_value(weights, means, poly: FeasiblePolytope, pi_idx: int, r: float, sigma2: float) -> tuple[float, int]:
    """Min over the neighbours of ``pi_idx`` of the pair term; also the argmin."""
    nbrs = neighbors(poly, pi_idx)
    if nbrs.size == 0:
        raise DegenerateGeometry("vertex has no neighbours (single-vertex polytope)")
    terms = _k.pair_values(
        np.asarray(means, dtype=float), np.asarray(weights, dtype=float), poly.vertices[pi_idx], poly.vertices[nbrs], r, sigma2
    )
    j = int(np.argmin(terms))
    return float(terms[j]), int(nbrs[j])


def evaluate_D(weights, means, poly: FeasiblePolytope, r: float, sigma2: float, multiplier=None, A_tilde=None):
    """Projection-lemma game value at fixed weights.

    :return: ``(value, pi_star_idx, neighbor_idx)``
    """
    if poly.n_vertices < 2:
        raise DegenerateGeometry("polytope has fewer than two vertices")
    best = (-np.inf, -1, -1)
    for i in r_good_vertices(poly, means, r):
        val, nb = inner_value(weights, means, poly, int(i), r, sigma2)
        if val > best[0]:
            best = (val, int(i), nb)
    pen = penalty(multiplier, A_tilde, weights)
    return best[0] - pen, best[1], best[2]


def multiplier_box(D_unpenalized: float, A_tilde, omega_star, b_max: float = B_MAX) -> float:
    """l1 radius of the multiplier box: ``D / min_i(-A_tilde^i omega*)``.

    A non-positive minimum slack falls back to ``b_max``; the quotient is also
    capped at ``b_max``.
    """
    D = max(float(D_unpenalized), 0.0)
    if D == 0.0:
        return 0.0
    A_tilde = np.atleast_2d(A_tilde)
    if A_tilde.shape[0] == 0:
        return 0.0
    gamma = float(np.min(-A_tilde @ np.asarray(omega_star)))
    if gamma <= 0:
        return b_max
    return min(D / gamma, b_max)


def multiplier_argmin(A_tilde, omega, B: float) -> np.ndarray:
    """Minimiser of ``-l @ A_tilde @ omega`` over ``{l >= 0, ||l||_1 <= B}``."""
    A_tilde = np.atleast_2d(A_tilde)
    l = np.zeros(A_tilde.shape[0])
    if A_tilde.shape[0] == 0:
        return l
    s = A_tilde @ np.asarray(omega)
    i = int(np.argmax(s))
    if s[i] > 0:
        l[i] = B
    return l


def _fw_setup(means, poly, pi_idx, r, sigma2):
    nbrs = neighbors(poly, pi_idx)
    if nbrs.size == 0:
        raise DegenerateGeometry("vertex has no neighbours (single-vertex polytope)")
    V = poly.vertices[pi_idx][None, :] - poly.vertices[nbrs]
    gap = np.maximum(V @ means - r, 0.0)
    c = gap**2 / (2.0 * sigma2)
    return V**2, c, nbrs


def optimize_allocation(
    means,
    poly: FeasiblePolytope,
    r: float,
    sigma2: float,
    multiplier=None,
    A_tilde=None,
    pi_star_idx: Optional[int] = None,
    budget: int = 300,
    domain: Optional[FeasiblePolytope] = None,
    init: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, float]:
    """Frank-Wolfe ascent of ``min_j term_j(w) - l @ A_tilde @ w`` over ``domain``.

    ``term_j`` are the pair terms between the fixed vertex ``pi_star_idx`` of
    ``poly`` and its neighbours; each is concave in ``w``.  The linear
    subproblem is a scan of the domain's vertices against a supergradient
    (gradient of the active term).  Steps follow ``2/(k+2)`` from ``k = 1``.

    :return: ``(best iterate, its objective value)``
    """
    means = np.asarray(means, dtype=float)
    domain = poly if domain is None else domain
    if pi_star_idx is None:
        pi_star_idx = int(np.argmax(poly.vertices @ means))
    V2, c, _ = _fw_setup(means, poly, pi_star_idx, r, sigma2)
    if multiplier is not None and A_tilde is not None and np.size(A_tilde):
        p = np.asarray(A_tilde).T @ np.asarray(multiplier)
    else:
        p = np.zeros(means.shape[0])
    verts = np.ascontiguousarray(domain.vertices)
    w0 = verts.mean(axis=0) if init is None else np.asarray(init, dtype=float)
    best_w, best_val = _k.frank_wolfe(V2, c, np.ascontiguousarray(p, dtype=float), verts, w0, int(budget))
    return best_w, float(best_val)


def solve_game(
    means,
    poly: FeasiblePolytope,
    r: float,
    sigma2: float,
    A_tilde=None,
    domain: Optional[FeasiblePolytope] = None,
    budget: int = 300,
    rounds: int = 5,
    b_max: float = B_MAX,
) -> GameSolution:
    """Max over r-good vertices and allocations of the (penalised) game value.

    With a constraint matrix the allocation and the multiplier are alternated
    ``rounds`` times: allocation at the current multiplier, then the box
    radius from the unpenalised value, then the box minimiser.
    """
    means = np.asarray(means, dtype=float)
    domain = simplex_polytope(poly.K) if domain is None else domain
    d = 0 if A_tilde is None else np.atleast_2d(A_tilde).shape[0]
    best: Optional[GameSolution] = None
    for i in r_good_vertices(poly, means, r):
        i = int(i)
        l = np.zeros(d)
        w, val = optimize_allocation(means, poly, r, sigma2, None, None, i, budget, domain)
        if d:
            for _ in range(rounds):
                D0, _ = inner_value(w, means, poly, i, r, sigma2)
                B = multiplier_box(D0, A_tilde, w, b_max)
                l_new = multiplier_argmin(A_tilde, w, B)
                if np.array_equal(l_new, l) and _ > 0:
                    break
                l = l_new
                w, val = optimize_allocation(means, poly, r, sigma2, l, A_tilde, i, budget, domain, init=w)
        D0, nb = inner_value(w, means, poly, i, r, sigma2)
        value = D0 - penalty(l, A_tilde, w)
        if best is None or value > best.value:
            lam, _ = confusing_instance(means, w, poly.vertices[i], poly.vertices[nb], r, sigma2)
            best = GameSolution(omega=w, multiplier=l, value=float(value), pi_star=i, neighbor=nb, lam=lam)
    return best


def characteristic_time(
    means,
    poly: FeasiblePolytope,
    r: float,
    sigma2: float,
    A_tilde=None,
    domain: Optional[FeasiblePolytope] = None,
    budget: int = 300,
    rounds: int = 5,
) -> float:
    """Reciprocal of the game value; ``inf`` when every r-good term clamps to zero."""
    sol = solve_game(means, poly, r, sigma2, A_tilde, domain, budget, rounds)
    if not sol.value > 0:
        return float("inf")
    return 1.0 / sol.value
