"""Violation accounting and complexity diagnostics; summaries across seeds."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import BanditInstance
from .gamesolver import characteristic_time
from .polytope import polytope_from_constraints, simplex_polytope


@dataclass(frozen=True)
class Summary:
    algorithm: str
    n_seeds: int
    median_tau: float
    std_tau: float
    mean_violation: float
    error_rate: float
    censored: int


def violation_increment(A_true, omega) -> float:
    """``max_i [A^i omega]_+``; zero for a feasible allocation."""
    A = np.atleast_2d(np.asarray(A_true, dtype=float))
    if A.shape[0] == 0:
        return 0.0
    return float(max(np.max(A @ np.asarray(omega, dtype=float)), 0.0))


def shadow_price(instance: BanditInstance) -> float:
    """Ratio of the largest to the smallest constraint slack (1 without constraints)."""
    if instance.d == 0:
        return 1.0
    g = np.asarray(instance.slack)
    return float(g.max() / g.min())


def summarize(records: Sequence) -> Summary:
    """Median and population std of uncensored stopping times; error rate over all runs."""
    if len(records) == 0:
        raise ValueError("summarize needs at least one record")
    algs = {r.algorithm for r in records}
    if len(algs) != 1:
        raise ValueError(f"records mix algorithms: {sorted(algs)}")
    taus = np.array([r.tau for r in records if not r.censored], dtype=float)
    n_cens = sum(1 for r in records if r.censored)
    if taus.size:
        med, std = float(np.median(taus)), float(np.std(taus))
    else:
        med = std = float("nan")
    return Summary(
        algorithm=records[0].algorithm,
        n_seeds=len(records),
        median_tau=med,
        std_tau=std,
        mean_violation=float(np.mean([r.cum_violation for r in records])),
        error_rate=float(np.mean([not r.correct for r in records])),
        censored=n_cens,
    )


@dataclass(frozen=True)
class Complexity:
    """Hardness diagnostics of an instance; no inequality between them is asserted."""

    T_known: float
    T_bai: float
    gap_complexity: float
    condition_number: float
    shadow_price: float


def complexity_diagnostics(instance: BanditInstance, budget: int = 300) -> Complexity:
    """Characteristic times with the true constraints and on the bare simplex.

    ``gap_complexity`` is ``sum_a 2 sigma2 / gap_a^2`` over the suboptimal arms
    (gaps clipped below at ``r``).  ``condition_number`` is the 2-norm
    condition number of the first nonsingular basis (K-1 tight rows plus the
    all-ones row) at the optimal vertex.
    """
    mu = np.asarray(instance.means)
    sigma2 = instance.sigma2 if instance.sigma2 > 0 else 1.0
    poly = polytope_from_constraints(instance.constraints)
    T_known = characteristic_time(mu, poly, instance.r, sigma2, budget=budget)
    T_bai = characteristic_time(mu, simplex_polytope(instance.K), instance.r, sigma2, budget=budget)
    i = int(np.argmax(poly.vertices @ mu))
    kappa = float("nan")
    for sub in itertools.combinations(np.flatnonzero(poly.active[i]), instance.K - 1):
        M = np.vstack([poly.G[list(sub)], np.ones((1, instance.K))])
        if np.linalg.matrix_rank(M) == instance.K:
            kappa = float(np.linalg.cond(M))
            break
    gaps = mu.max() - mu
    gaps = np.maximum(gaps[gaps > 0], max(instance.r, 1e-12))
    H = float(np.sum(2.0 * sigma2 / gaps**2))
    return Complexity(
        T_known=T_known,
        T_bai=T_bai,
        gap_complexity=H,
        condition_number=kappa,
        shadow_price=shadow_price(instance),
    )
