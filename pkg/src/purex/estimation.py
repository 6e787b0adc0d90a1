"""Ridge estimates of means and constraint columns, and the pessimistic matrix.

Arms are canonical basis vectors, so the design matrix is
``diag(v + N_a)`` and every estimate decouples per arm.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Observation


@dataclass
class EstimatorState:
    K: int
    d: int
    v: float = 1.0
    counts: np.ndarray = field(default=None)
    reward_sums: np.ndarray = field(default=None)
    cost_sums: np.ndarray = field(default=None)
    t: int = 0

    def __post_init__(self):
        if self.v <= 0:
            raise ValueError("ridge parameter v must be positive")
        if self.counts is None:
            self.counts = np.zeros(self.K, dtype=np.int64)
        if self.reward_sums is None:
            self.reward_sums = np.zeros(self.K)
        if self.cost_sums is None:
            self.cost_sums = np.zeros((self.d, self.K))

    @property
    def design_diag(self) -> np.ndarray:
        return self.v + self.counts

    @property
    def mu_hat(self) -> np.ndarray:
        return self.reward_sums / self.design_diag

    @property
    def A_hat(self) -> np.ndarray:
        return self.cost_sums / self.design_diag

    def copy(self) -> "EstimatorState":
        return EstimatorState(
            self.K, self.d, self.v, self.counts.copy(), self.reward_sums.copy(), self.cost_sums.copy(), self.t
        )


@dataclass(frozen=True)
class PessimisticModel:
    mu_hat: np.ndarray
    A_hat: np.ndarray
    A_tilde: np.ndarray
    f_radius: float


def update(state: EstimatorState, obs: Observation) -> EstimatorState:
    """Accumulate one observation in place and return the state."""
    a = obs.arm
    state.counts[a] += 1
    state.reward_sums[a] += obs.reward
    if state.d:
        state.cost_sums[:, a] += obs.cost
    state.t += 1
    return state


def confidence_radius(state: EstimatorState, delta: float, K: Optional[int] = None) -> float:
    """Ellipsoid radius ``1 + sqrt(ln(K/delta)/2 + ln det(Sigma_t)/4)``."""
    K = state.K if K is None else K
    logdet = float(np.sum(np.log(state.design_diag)))
    inner = 0.5 * np.log(K / delta) + 0.25 * logdet
    return 1.0 + float(np.sqrt(max(inner, 0.0)))


def pessimistic_matrix(state: EstimatorState, delta: float, radius: Optional[float] = None) -> PessimisticModel:
    """Shift every constraint entry down by ``f / sqrt(v + N_a)``.

    Since ``||pi||_{Sigma^-1} <= sum_a pi_a / sqrt(v + N_a)`` on the simplex,
    ``A_tilde @ pi`` lower-bounds the ellipsoid minimum, so the polytope
    ``{A_tilde pi <= 0}`` contains the pessimistic feasible set.
    """
    f = confidence_radius(state, delta) if radius is None else float(radius)
    A_hat = state.A_hat
    A_tilde = A_hat - f / np.sqrt(state.design_diag)[None, :]
    return PessimisticModel(mu_hat=state.mu_hat, A_hat=A_hat, A_tilde=A_tilde, f_radius=f)


def rho_radius(state: EstimatorState, delta: float, omega: np.ndarray, radius: Optional[float] = None) -> float:
    """``f(t, delta) * ||omega||_{Sigma_t^{-1}}``."""
    f = confidence_radius(state, delta) if radius is None else float(radius)
    omega = np.asarray(omega, dtype=float)
    return f * float(np.sqrt(np.sum(omega**2 / state.design_diag)))
