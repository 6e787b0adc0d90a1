"""Independent reference computations used by several test modules."""
import math

import numpy as np
from scipy.optimize import minimize_scalar


def grid_alt_infimum(mu, w, r, sigma2, lo=-1.0, hi=3.0, step=0.01):
    """Inf of sum_a w_a (mu_a - lam_a)^2 / (2 sigma2) over lam making e_{i*} not r-good (K-arm simplex).

    Only lam_{i*} and one challenger lam_j need to move, so the search is a
    2-D grid per challenger with the condition lam_j >= lam_{i*} + r.
    """
    mu = np.asarray(mu, dtype=float)
    i = int(np.argmax(mu))
    g = np.arange(lo, hi + step / 2, step)
    Li, Lj = np.meshgrid(g, g, indexing="ij")
    best = np.inf
    for j in range(mu.size):
        if j == i:
            continue
        cost = (w[i] * (mu[i] - Li) ** 2 + w[j] * (mu[j] - Lj) ** 2) / (2 * sigma2)
        cost = np.where(Lj >= Li + r - 1e-12, cost, np.inf)
        best = min(best, float(cost.min()))
    return best


def bai_value(mu, sigma2=1.0):
    """Gaussian BAI max-min value by equalising the pairwise terms.

    For a fixed weight w1 on the best arm, the common value c and the other
    weights solve w1 w_a D_a / (w1 + w_a) = c with D_a = gap_a^2 / (2 sigma2)
    and sum(w) = 1; c is found by bisection and w1 by bounded scalar search.
    """
    mu = np.asarray(mu, dtype=float)
    i = int(np.argmax(mu))
    D = np.delete((mu[i] - mu) ** 2 / (2 * sigma2), i)

    def others(w1, c):
        den = w1 * D - c
        return c * w1 / den

    def value_at(w1):
        lo, hi = 0.0, w1 * D.min()
        for _ in range(200):
            c = 0.5 * (lo + hi)
            if w1 + others(w1, c).sum() > 1:
                hi = c
            else:
                lo = c
        return lo

    res = minimize_scalar(lambda x: -value_at(x), bounds=(1e-6, 1 - 1e-6), method="bounded",
                          options={"xatol": 1e-12})
    return -res.fun


def h_inv_newton(x):
    """Inverse of u - ln u on u >= 1 by Newton iteration (independent of bisection)."""
    u = max(x + math.log(x) + 1.0, 1.0 + 1e-12) if x > 1 else 1.0
    for _ in range(200):
        f = u - math.log(u) - x
        u_new = u - f / (1 - 1 / u) if u > 1 + 1e-15 else u + 1e-6
        if u_new < 1:
            u_new = (u + 1) / 2
        if abs(u_new - u) < 1e-15:
            break
        u = u_new
    return u
