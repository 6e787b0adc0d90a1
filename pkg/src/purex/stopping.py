"""GLR stopping statistic and the two threshold families."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gamesolver import evaluate_D
from .polytope import FeasiblePolytope

MODES = ("practical", "theoretical", "none")


@dataclass(frozen=True)
class StoppingConfig:
    mode: str = "practical"
    delta: float = 0.01
    S0: Optional[int] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown threshold mode {self.mode!r}; expected one of {MODES}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")

    def threshold(self, t: int, counts: np.ndarray, K: int, d: int) -> float:
        if self.mode == "practical":
            return threshold_practical(t, self.delta)
        if self.mode == "none":
            return math.inf
        S0 = K if self.S0 is None else self.S0
        if not 1 <= S0 <= K:
            raise ValueError("S0 must lie in [1, K]")
        return threshold_theoretical(t, counts, self.delta, K, d, S0)


def glr_statistic(counts, mu_hat, poly: FeasiblePolytope, r: float, sigma2: float) -> float:
    """Count-weighted distance from ``mu_hat`` to the nearest alternative."""
    val, _, _ = evaluate_D(np.asarray(counts, dtype=float), mu_hat, poly, r, sigma2)
    return max(float(val), 0.0)


def threshold_practical(t: int, delta: float) -> float:
    return math.log((1.0 + math.log(math.log(max(t, 3)))) / delta)


def h(u: float) -> float:
    return u - math.log(u)


def h_inv(x: float, iters: int = 60) -> float:
    """Inverse of ``u - ln u`` on the branch ``u >= 1`` (needs ``x >= 1``)."""
    if x < 1.0:
        raise ValueError("h_inv is defined for x >= 1")
    lo, hi = 1.0, 1.0 + x + math.sqrt(2.0 * x) + 10.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if h(mid) < x:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def h_tilde(z: float, x: float) -> float:
    """Two-branch extension used by the threshold function."""
    if x >= h_inv(1.0 / math.log(z)):
        u = h_inv(x)
        return math.exp(1.0 / u) * u
    return z * (x - math.log(math.log(z)))


def calT(x: float) -> float:
    return 2.0 * h_tilde(1.5, (h_inv(1.0 + x) + math.log(math.pi**2 / 3.0)) / 2.0)


def threshold_theoretical(t: int, counts, delta: float, K: int, d: int, S0: Optional[int] = None) -> float:
    """``3 S0 ln(1 + ln Nbar) + S0 calT((min(K, d) + ln(1/delta)) / S0)`` with ``Nbar = max_a N_a``."""
    S0 = K if S0 is None else S0
    nbar = max(float(np.max(counts)), 1.0)
    return 3.0 * S0 * math.log(1.0 + math.log(nbar)) + S0 * calT((min(K, d) + math.log(1.0 / delta)) / S0)
