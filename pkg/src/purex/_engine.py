"""Compiled sampler loop.

One call advances a run by up to ``max_steps`` iterations of
refresh -> stopping test -> target -> C-tracking -> sample -> update.
Noise comes pre-drawn from the run's generator (one standard normal for the
reward, then ``d`` for the cost vector, per step), so a run consumes its
generator exactly as repeated ``core.sample_step`` calls would.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from ._kernels import (
    active_mask,
    allocation_fw,
    ctrack_argmin,
    glr_scan,
    homogeneous_vertices,
    pair_values,
    stacked_rows,
)

LATS, LAGEX, UNIFORM, CTNS, CGE, PTNS, CTNS_WLAG, CGE_WLAG = range(8)
CODES = {"lats": LATS, "lagex": LAGEX, "uniform": UNIFORM, "ctns": CTNS, "cge": CGE, "ptns": PTNS,
         "ctns_wlag": CTNS_WLAG, "cge_wlag": CGE_WLAG}

# slots of the scalar state vector
T, CUM_VIOL, MAX_DEV, LAST_STAT, LAST_BETA, STOPPED, REC_IDX, NOISE_POS, FALLBACK, TRACK_FAIL, LAST_ARM, HAS_GEOM = range(12)
N_SCALARS = 12

FEAS_TOL = 1e-9
DEDUP_TOL = 1e-7
ACTIVE_TOL = 1e-9


@njit(cache=True)
def simplex_projection(x):
    """Euclidean projection onto the probability simplex."""
    K = x.shape[0]
    u = np.sort(x)[::-1]
    css = 0.0
    theta = 0.0
    for i in range(K):
        css += u[i]
        t = (css - 1.0) / (i + 1.0)
        if u[i] - t > 0.0:
            theta = t
    out = np.empty(K)
    for i in range(K):
        out[i] = max(x[i] - theta, 0.0)
    return out


@njit(cache=True)
def dykstra(Gc, hc, x0, max_iter, tol):
    """Dykstra projection onto simplex cap {Gc x <= hc}.

    Returns ``(point, converged)``; without convergence the least-violating
    iterate is returned.
    """
    K = x0.shape[0]
    m = Gc.shape[0]
    x = x0.copy()
    # already feasible: fixed point
    ok = True
    s = 0.0
    for a in range(K):
        s += x[a]
        if x[a] < -1e-12:
            ok = False
    if abs(s - 1.0) > 1e-12:
        ok = False
    if ok:
        for i in range(m):
            acc = 0.0
            for a in range(K):
                acc += Gc[i, a] * x[a]
            if acc > hc[i] + 1e-12:
                ok = False
                break
    if ok:
        return x, True
    if m == 0:
        return simplex_projection(x), True
    norms2 = np.zeros(m)
    for i in range(m):
        for a in range(K):
            norms2[i] += Gc[i, a] * Gc[i, a]
    incr = np.zeros((m + 1, K))
    best = x.copy()
    best_viol = np.inf
    z = np.empty(K)
    for _ in range(max_iter):
        x_old = x.copy()
        for a in range(K):
            z[a] = x[a] + incr[0, a]
        y = simplex_projection(z)
        for a in range(K):
            incr[0, a] = z[a] - y[a]
            x[a] = y[a]
        for i in range(m):
            excess = -hc[i]
            for a in range(K):
                z[a] = x[a] + incr[i + 1, a]
                excess += Gc[i, a] * z[a]
            if excess > 0.0 and norms2[i] > 0.0:
                f = excess / norms2[i]
                for a in range(K):
                    y_a = z[a] - f * Gc[i, a]
                    incr[i + 1, a] = z[a] - y_a
                    x[a] = y_a
            else:
                for a in range(K):
                    incr[i + 1, a] = 0.0
                    x[a] = z[a]
        viol = 0.0
        s = 0.0
        for a in range(K):
            s += x[a]
            if -x[a] > viol:
                viol = -x[a]
        if abs(s - 1.0) > viol:
            viol = abs(s - 1.0)
        for i in range(m):
            acc = -hc[i]
            for a in range(K):
                acc += Gc[i, a] * x[a]
            if acc > viol:
                viol = acc
        if viol < best_viol:
            best_viol = viol
            for a in range(K):
                best[a] = x[a]
        dn = 0.0
        for a in range(K):
            dn += (x[a] - x_old[a]) ** 2
        # a cycle can leave x unchanged before the increments settle
        if math.sqrt(dn) < tol and viol <= tol:
            return x, True
    return best, False


@njit(cache=True)
def confusing_point(mu, w, pi, pi2, r, sigma2):
    """Closed-form closest instance on ``lambda @ (pi - pi2) = r``."""
    K = mu.shape[0]
    lam = mu.copy()
    gap = r
    free_norm = 0.0
    S = 0.0
    for a in range(K):
        v = pi[a] - pi2[a]
        gap -= mu[a] * v
        if v != 0.0:
            if w[a] <= 0.0:
                free_norm += v * v
            else:
                S += v * v / w[a]
    if free_norm > 0.0:
        for a in range(K):
            v = pi[a] - pi2[a]
            if v != 0.0 and w[a] <= 0.0:
                lam[a] += gap * v / free_norm
        return lam
    if S <= 0.0:
        return lam
    gamma = gap / (sigma2 * S)
    for a in range(K):
        v = pi[a] - pi2[a]
        if v != 0.0:
            lam[a] += gamma * v * sigma2 / w[a]
    return lam


@njit(cache=True)
def _max_row(A, w):
    d, K = A.shape
    best = -np.inf
    for i in range(d):
        s = 0.0
        for a in range(K):
            s += A[i, a] * w[a]
        if s > best:
            best = s
    return best


@njit(cache=True)
def _multiplier(A_til, w, D0, b_max):
    """Box radius from ``D0`` and the slack at ``w``, then the box minimiser."""
    d, K = A_til.shape
    l = np.zeros(d)
    if d == 0:
        return l
    D = max(D0, 0.0)
    if D == 0.0:
        return l
    s = np.empty(d)
    for i in range(d):
        acc = 0.0
        for a in range(K):
            acc += A_til[i, a] * w[a]
        s[i] = acc
    gamma = np.inf
    for i in range(d):
        if -s[i] < gamma:
            gamma = -s[i]
    B = b_max if gamma <= 0.0 else min(D / gamma, b_max)
    i_star = 0
    for i in range(1, d):
        if s[i] > s[i_star]:
            i_star = i
    if s[i_star] > 0.0:
        l[i_star] = B
    return l


@njit(cache=True)
def advance(
    alg, A_true, means, env_sd, cost_sd, r, s2, v, log_K_delta,
    thr_mode, thr_const, S0, delta, horizon, refresh_every, fw_budget, eta, ada_eps, g_mode,
    lats_simplex, forced, b_max, Q, viol_target, check_tracking,
    V_true, act_true, G_true,
    counts, reward_sums, cost_sums, cum_alloc, multiplier, ada_sq, omega, target, scal,
    V, act, G, A_til, noise, max_steps, pause_every,
):
    d, K = A_true.shape
    eye = np.eye(K)
    steps = 0
    while steps < max_steps:
        t = int(scal[T])
        if t >= horizon:
            break
        if int(scal[NOISE_POS]) >= noise.shape[0]:
            break
        refresh = scal[HAS_GEOM] == 0.0 or (t - K) % refresh_every == 0
        mu = np.empty(K)
        for a in range(K):
            mu[a] = reward_sums[a] / (v + counts[a])
        if refresh:
            if alg == CTNS or alg == CGE:
                V, act, G, A_til = V_true, act_true, G_true, A_true
            else:
                logdet = 0.0
                for a in range(K):
                    logdet += math.log(v + counts[a])
                f = 1.0 + math.sqrt(max(log_K_delta + 0.25 * logdet, 0.0))
                A_til = np.empty((d, K))
                for a in range(K):
                    dg = v + counts[a]
                    for i in range(d):
                        A_til[i, a] = cost_sums[i, a] / dg - f / math.sqrt(dg)
                V = homogeneous_vertices(A_til, FEAS_TOL, DEDUP_TOL)
                G = stacked_rows(A_til)
                scal[FALLBACK] = 0.0
                if V.shape[0] == 0:
                    # empty estimate (off the good event): fall back to the simplex
                    V = eye.copy()
                    G = stacked_rows(np.zeros((0, K)))
                    scal[FALLBACK] = 1.0
                act = active_mask(V, G, np.zeros(G.shape[0]), ACTIVE_TOL)
            scal[HAS_GEOM] = 1.0

        stat, top, nbrs = glr_scan(V, act, G, mu, counts, r, s2)
        if thr_mode == 0:
            beta = math.log((1.0 + math.log(math.log(max(t, 3)))) / delta)
        elif thr_mode == 2:
            beta = np.inf
        else:
            nbar = 1.0
            for a in range(K):
                if counts[a] > nbar:
                    nbar = counts[a]
            beta = 3.0 * S0 * math.log(1.0 + math.log(nbar)) + thr_const
        scal[LAST_STAT] = stat
        scal[LAST_BETA] = beta
        if stat > beta:
            scal[STOPPED] = 1.0
            scal[REC_IDX] = top
            break

        # target allocation
        est_rows = A_til if scal[FALLBACK] == 0.0 else np.zeros((0, K))
        if alg == LAGEX or alg == CGE or alg == CGE_WLAG:
            if alg == LAGEX and d > 0 and nbrs.size > 0:
                D0 = pair_values(mu, omega, V[top], V[nbrs], r, s2).min()
                mult = _multiplier(A_til, omega, D0, b_max)
                for i in range(d):
                    multiplier[i] = mult[i]
            for a in range(K):
                target[a] = omega[a]
        elif refresh:
            if alg == UNIFORM:
                for a in range(K):
                    target[a] = 1.0 / K
            elif alg == PTNS:
                j = 0
                for a in range(1, K):
                    if mu[a] > mu[j]:
                        j = a
                nb = np.empty(K - 1, dtype=np.int64)
                q = 0
                for a in range(K):
                    if a != j:
                        nb[q] = a
                        q += 1
                w0 = np.full(K, 1.0 / K)
                wb, _ = allocation_fw(mu, eye, j, nb, r, s2, np.zeros(K), eye, w0, fw_budget)
                wp, _conv = dykstra(est_rows, np.zeros(est_rows.shape[0]), wb, 2000, 1e-8)
                for a in range(K):
                    target[a] = wp[a]
            elif nbrs.size == 0:
                for a in range(K):
                    target[a] = 1.0 / K
            else:
                dom = V
                if alg == LATS and lats_simplex:
                    dom = eye
                p = np.zeros(K)
                if alg == LATS:
                    for i in range(d):
                        if multiplier[i] != 0.0:
                            for a in range(K):
                                p[a] += A_til[i, a] * multiplier[i]
                w0 = np.empty(K)
                for a in range(K):
                    acc = 0.0
                    for q in range(dom.shape[0]):
                        acc += dom[q, a]
                    w0[a] = acc / dom.shape[0]
                wf, _val = allocation_fw(mu, V, top, nbrs, r, s2, p, dom, w0, fw_budget)
                for a in range(K):
                    target[a] = wf[a]
                if alg == LATS and d > 0:
                    D0 = pair_values(mu, wf, V[top], V[nbrs], r, s2).min()
                    mult = _multiplier(A_til, wf, D0, b_max)
                    for i in range(d):
                        multiplier[i] = mult[i]
            scal[HAS_GEOM] = 1.0

        # C-tracking of the (optionally mixed) target
        eps = 1.0 / (2.0 * math.sqrt(t + K * K)) if forced else 0.0
        for a in range(K):
            cum_alloc[a] += (1.0 - K * eps) * target[a] + eps
        arm = ctrack_argmin(counts, cum_alloc)
        pos = int(scal[NOISE_POS])
        reward = means[arm] + env_sd * noise[pos, 0]
        counts[arm] += 1.0
        reward_sums[arm] += reward
        for i in range(d):
            cost_sums[i, arm] += A_true[i, arm] + cost_sd * noise[pos, 1 + i]
        scal[NOISE_POS] = pos + 1
        t += 1
        scal[T] = t
        scal[LAST_ARM] = arm

        if d > 0:
            if viol_target:
                vt = _max_row(A_true, target)
            else:
                vt = _max_row(A_true, counts / t)
            if vt > 0.0:
                scal[CUM_VIOL] += vt
        dev = 0.0
        for a in range(K):
            dd = abs(counts[a] - cum_alloc[a])
            if dd > dev:
                dev = dd
        if dev > scal[MAX_DEV]:
            scal[MAX_DEV] = dev
        steps += 1
        if check_tracking and dev > K * (1.0 + math.sqrt(t)):
            scal[TRACK_FAIL] = 1.0
            break

        if alg == LAGEX or alg == CGE or alg == CGE_WLAG:
            # optimistic losses at the confusing instance, then an AdaGrad step
            g = math.log(max(t, 3))
            if g_mode == 1:
                g = 3.0 * g + math.log(g)
            for a in range(K):
                mu[a] = reward_sums[a] / (v + counts[a])
            U = np.empty(K)
            for a in range(K):
                U[a] = g / counts[a]
            if nbrs.size > 0:
                vals = pair_values(mu, omega, V[top], V[nbrs], r, s2)
                jm = 0
                for q in range(1, vals.shape[0]):
                    if vals[q] < vals[jm]:
                        jm = q
                lam = confusing_point(mu, omega, V[top], V[nbrs[jm]], r, s2)
                for a in range(K):
                    half = math.sqrt(2.0 * s2 * g / counts[a])
                    lo = (mu[a] - half - lam[a]) ** 2 / (2.0 * s2)
                    hi = (mu[a] + half - lam[a]) ** 2 / (2.0 * s2)
                    U[a] = max(U[a], max(lo, hi))
            x = np.empty(K)
            for a in range(K):
                gr = U[a]
                if alg == LAGEX:
                    for i in range(d):
                        gr -= multiplier[i] * A_til[i, a]
                gr = min(max(gr, -Q), Q)
                ada_sq[a] += gr * gr
                x[a] = omega[a] + eta * gr / math.sqrt(ada_sq[a] + ada_eps)
            wa = simplex_projection(x)
            if alg == CGE:
                wa, _c1 = dykstra(A_true, np.zeros(d), wa, 2000, 1e-8)
            elif alg == CGE_WLAG:
                wa, _c2 = dykstra(est_rows, np.zeros(est_rows.shape[0]), wa, 2000, 1e-8)
            for a in range(K):
                omega[a] = wa[a]

        if pause_every > 0 and t % pause_every == 0:
            break
    return V, act, G, A_til
