"""Ground-truth bandit model and stochastic feedback.

Constraints are stored in homogeneous form ``A @ pi <= 0``; the simplex
itself (``sum(pi) == 1``, ``pi >= 0``) is never part of ``A``.  A constraint
written as ``c @ pi <= b`` becomes the row ``c - b`` because every policy sums
to one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog


class InstanceError(ValueError):
    """Raised when an environment description does not define a valid instance."""


@dataclass(frozen=True)
class Observation:
    t: int
    arm: int
    reward: float
    cost: np.ndarray


@dataclass(frozen=True)
class BanditInstance:
    """Immutable simulated environment.

    ``sigma2`` is the reward variance used to generate samples. It may be zero
    for deterministic test environments; learners take their own variance
    from the run configuration.
    """

    means: np.ndarray
    sigma2: float
    constraints: np.ndarray
    cost_noise_sd: float = 0.1
    r: float = 0.01
    delta: float = 0.01
    slack: np.ndarray = field(default=None, repr=False)
    name: str = ""

    @property
    def K(self) -> int:
        return self.means.shape[0]

    @property
    def d(self) -> int:
        return self.constraints.shape[0]


def homogenize(coef: Sequence[float], rhs: float) -> np.ndarray:
    """Turn ``coef @ pi <= rhs`` into a row ``a`` with ``a @ pi <= 0`` on the simplex."""
    return np.asarray(coef, dtype=float) - float(rhs)


def _frozen(x: np.ndarray) -> np.ndarray:
    x = np.array(x, dtype=float, copy=True)
    x.setflags(write=False)
    return x


def slack_vector(A: np.ndarray) -> np.ndarray:
    """Per-row slack ``max_{pi in simplex} -A^i pi``; attained at a simplex vertex."""
    if A.shape[0] == 0:
        return np.zeros(0)
    return np.max(-A, axis=1)


def _max_uniform_margin(A: np.ndarray) -> float:
    """Largest ``s`` such that ``A pi + s <= 0`` for some pi on the simplex."""
    d, K = A.shape
    # variables (pi_1..pi_K, s); maximise s
    c = np.zeros(K + 1)
    c[-1] = -1.0
    A_ub = np.hstack([A, np.ones((d, 1))])
    b_ub = np.zeros(d)
    A_eq = np.hstack([np.ones((1, K)), np.zeros((1, 1))])
    bounds = [(0.0, None)] * K + [(None, 1e6)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=bounds, method="highs")
    if res.status != 0:
        raise InstanceError(f"feasibility LP failed: {res.message}")
    return float(res.x[-1])


def build_instance(
    means: Sequence[float],
    sigma2: float = 1.0,
    constraints: Optional[np.ndarray] = None,
    cost_noise_sd: float = 0.1,
    r: float = 0.01,
    delta: float = 0.01,
    name: str = "",
) -> BanditInstance:
    """Validate an environment and compute its slack vector.

    :param means: arm means, length K >= 2
    :param constraints: d x K homogeneous constraint matrix (may be empty)
    :raises InstanceError: on malformed input, an empty feasible set, or a
        feasible set without a strictly feasible policy
    """
    mu = np.asarray(means, dtype=float)
    if mu.ndim != 1 or mu.shape[0] < 2:
        raise InstanceError("means must be a vector with at least 2 arms")
    if not np.all(np.isfinite(mu)):
        raise InstanceError("means must be finite")
    K = mu.shape[0]
    if not sigma2 >= 0:
        raise InstanceError("sigma2 must be non-negative")
    if not 0.0 < delta < 1.0:
        raise InstanceError("delta must lie in (0, 1)")
    if not r >= 0:
        raise InstanceError("r must be non-negative")
    if not cost_noise_sd >= 0:
        raise InstanceError("cost_noise_sd must be non-negative")
    A = np.zeros((0, K)) if constraints is None else np.atleast_2d(np.asarray(constraints, dtype=float))
    if A.size == 0:
        A = np.zeros((0, K))
    if A.shape[1] != K:
        raise InstanceError(f"constraint matrix has {A.shape[1]} columns, expected {K}")
    if not np.all(np.isfinite(A)):
        raise InstanceError("constraint matrix must be finite")

    if A.shape[0] > 0:
        margin = _max_uniform_margin(A)
        if margin < -1e-12:
            raise InstanceError("infeasible constraints: no policy on the simplex satisfies A pi <= 0")
        if margin <= 1e-12:
            raise InstanceError(
                "constraints have zero slack: no policy satisfies A pi < 0 strictly"
            )
    return BanditInstance(
        means=_frozen(mu),
        sigma2=float(sigma2),
        constraints=_frozen(A),
        cost_noise_sd=float(cost_noise_sd),
        r=float(r),
        delta=float(delta),
        slack=_frozen(slack_vector(A)),
        name=name,
    )


def sample_step(instance: BanditInstance, arm: int, rng: np.random.Generator, t: int = 0) -> Observation:
    """Draw one reward and one cost vector for ``arm``.

    Both noise draws happen even when the corresponding scale is zero so the
    generator advances identically for every environment.
    """
    if not 0 <= arm < instance.K:
        raise IndexError(f"arm {arm} out of range for K={instance.K}")
    z = rng.standard_normal()
    zc = rng.standard_normal(instance.d)
    reward = instance.means[arm] + np.sqrt(instance.sigma2) * z
    cost = instance.constraints[:, arm] + instance.cost_noise_sd * zc
    return Observation(t=t, arm=int(arm), reward=float(reward), cost=cost)


def is_policy(w: np.ndarray, tol: float = 1e-9) -> bool:
    w = np.asarray(w, dtype=float)
    return bool(np.all(w >= -tol) and abs(w.sum() - 1.0) <= tol)
