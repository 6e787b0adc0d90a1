"""Compiled inner loops shared by the polytope code and the samplers.

Every routine here has a plain-numpy meaning documented at its call site;
these versions only exist because the samplers call them once per step.
"""
from __future__ import annotations

import numpy as np
from numba import njit

SING_TOL = 1e-10
RANK_TOL = 1e-9


@njit(cache=True)
def _solve_square(M, b, tol):
    """Gaussian elimination with partial pivoting; ok=False when singular."""
    n = M.shape[0]
    A = M.copy()
    x = b.copy()
    for col in range(n):
        piv = col
        best = abs(A[col, col])
        for r in range(col + 1, n):
            if abs(A[r, col]) > best:
                best = abs(A[r, col])
                piv = r
        if best <= tol:
            return x, False
        if piv != col:
            for c in range(n):
                tmp = A[col, c]
                A[col, c] = A[piv, c]
                A[piv, c] = tmp
            tmp = x[col]
            x[col] = x[piv]
            x[piv] = tmp
        for r in range(col + 1, n):
            f = A[r, col] / A[col, col]
            if f != 0.0:
                for c in range(col, n):
                    A[r, c] -= f * A[col, c]
                x[r] -= f * x[col]
    for r in range(n - 1, -1, -1):
        s = x[r]
        for c in range(r + 1, n):
            s -= A[r, c] * x[c]
        x[r] = s / A[r, r]
    return x, True


@njit(cache=True)
def _rank(M, tol):
    A = M.copy()
    m, n = A.shape
    rank = 0
    row = 0
    for col in range(n):
        if row >= m:
            break
        piv = row
        best = abs(A[row, col])
        for r in range(row + 1, m):
            if abs(A[r, col]) > best:
                best = abs(A[r, col])
                piv = r
        if best <= tol:
            continue
        for c in range(n):
            tmp = A[row, c]
            A[row, c] = A[piv, c]
            A[piv, c] = tmp
        for r in range(row + 1, m):
            f = A[r, col] / A[row, col]
            for c in range(col, n):
                A[r, c] -= f * A[row, c]
        row += 1
        rank += 1
    return rank


@njit(cache=True)
def basic_solutions(G, h, combos, feas_tol, dedup_tol):
    """Feasible, de-duplicated basic solutions of ``{G x <= h, sum x = 1}``.

    Returns the vertex array in combination order (first occurrence kept).
    """
    m, K = G.shape
    nc = combos.shape[0]
    out = np.empty((nc, K))
    n = 0
    M = np.empty((K, K))
    b = np.empty(K)
    for k in range(nc):
        for i in range(K - 1):
            row = combos[k, i]
            for j in range(K):
                M[i, j] = G[row, j]
            b[i] = h[row]
        for j in range(K):
            M[K - 1, j] = 1.0
        b[K - 1] = 1.0
        x, ok = _solve_square(M, b, SING_TOL)
        if not ok:
            continue
        feasible = True
        for i in range(m):
            s = 0.0
            for j in range(K):
                s += G[i, j] * x[j]
            if s > h[i] + feas_tol:
                feasible = False
                break
        if not feasible:
            continue
        dup = False
        for q in range(n):
            dmax = 0.0
            for j in range(K):
                dd = abs(out[q, j] - x[j])
                if dd > dmax:
                    dmax = dd
            if dmax <= dedup_tol:
                dup = True
                break
        if dup:
            continue
        for j in range(K):
            out[n, j] = x[j]
        n += 1
    return out[:n].copy()


@njit(cache=True)
def active_mask(V, G, h, tol):
    n = V.shape[0]
    m, K = G.shape
    act = np.zeros((n, m), dtype=np.bool_)
    for v in range(n):
        for i in range(m):
            s = 0.0
            for j in range(K):
                s += G[i, j] * V[v, j]
            act[v, i] = abs(s - h[i]) <= tol
    return act


@njit(cache=True)
def neighbors_of(i, active, G):
    """Vertices joined to ``i`` by an edge.

    Two vertices span an edge when their common tight rows, with the
    all-ones row, have rank K-1.  When both vertices are simple (exactly
    K-1 tight rows) an overlap of K-2 already implies it.
    """
    n, m = active.shape
    K = G.shape[1]
    cnt_i = 0
    for q in range(m):
        if active[i, q]:
            cnt_i += 1
    out = np.empty(n, dtype=np.int64)
    k = 0
    for j in range(n):
        if j == i:
            continue
        shared = 0
        cnt_j = 0
        for q in range(m):
            if active[j, q]:
                cnt_j += 1
                if active[i, q]:
                    shared += 1
        if shared < K - 2:
            continue
        if cnt_i == K - 1 and cnt_j == K - 1:
            out[k] = j
            k += 1
            continue
        M = np.empty((shared + 1, K))
        r = 0
        for q in range(m):
            if active[i, q] and active[j, q]:
                for c in range(K):
                    M[r, c] = G[q, c]
                r += 1
        for c in range(K):
            M[shared, c] = 1.0
        if _rank(M, RANK_TOL) == K - 1:
            out[k] = j
            k += 1
    return out[:k].copy()


@njit(cache=True)
def pair_values(mu, w, pi, nbrs, r, sigma2):
    """Pair terms of ``pi`` against each row of ``nbrs`` at weights ``w``."""
    J, K = nbrs.shape
    out = np.zeros(J)
    for j in range(J):
        gap = 0.0
        S = 0.0
        blocked = False
        for a in range(K):
            v = pi[a] - nbrs[j, a]
            gap += mu[a] * v
            if v != 0.0:
                if w[a] <= 0.0:
                    blocked = True
                else:
                    S += v * v / w[a]
        gap -= r
        if blocked or gap <= 0.0 or S <= 0.0:
            out[j] = 0.0
        else:
            out[j] = gap * gap / (2.0 * sigma2 * S)
    return out


@njit(cache=True)
def frank_wolfe(V2, c, p, verts, w0, budget):
    """Maximise ``min_j c_j / sum_a V2[j,a]/w_a - p @ w`` over conv(verts).

    Terms with ``c_j = 0`` or an infinite denominator count as zero.  Steps
    are ``2/(k+2)`` from ``k = 1``; the best iterate is returned.
    """
    J, K = V2.shape
    nv = verts.shape[0]
    w = w0.copy()
    best_w = w0.copy()
    best_val = -np.inf
    grad = np.empty(K)
    S = np.empty(J)
    for k in range(1, budget + 1):
        jmin = 0
        tmin = np.inf
        for j in range(J):
            s = 0.0
            inf = False
            for a in range(K):
                if V2[j, a] > 0.0:
                    if w[a] <= 0.0:
                        inf = True
                        break
                    s += V2[j, a] / w[a]
            S[j] = s
            if inf or c[j] <= 0.0:
                t = 0.0
                S[j] = np.inf
            else:
                t = c[j] / s
            if t < tmin:
                tmin = t
                jmin = j
        pen = 0.0
        for a in range(K):
            pen += p[a] * w[a]
        val = tmin - pen
        if val > best_val:
            best_val = val
            for a in range(K):
                best_w[a] = w[a]
        if tmin > 0.0:
            sj = S[jmin]
            for a in range(K):
                if V2[jmin, a] > 0.0:
                    grad[a] = c[jmin] * V2[jmin, a] / (w[a] * w[a] * sj * sj) - p[a]
                else:
                    grad[a] = -p[a]
        else:
            # active term is zero: move mass toward the coordinates it needs
            for a in range(K):
                grad[a] = (1.0 if V2[jmin, a] > 0.0 else 0.0) - p[a]
        vbest = 0
        gbest = -np.inf
        for q in range(nv):
            s = 0.0
            for a in range(K):
                s += verts[q, a] * grad[a]
            if s > gbest:
                gbest = s
                vbest = q
        step = 2.0 / (k + 2.0)
        for a in range(K):
            w[a] += step * (verts[vbest, a] - w[a])
    return best_w, best_val


@njit(cache=True)
def ctrack_argmin(counts, cum_alloc):
    K = counts.shape[0]
    best = 0
    bval = counts[0] - cum_alloc[0]
    for a in range(1, K):
        v = counts[a] - cum_alloc[a]
        if v < bval:
            bval = v
            best = a
    return best


@njit(cache=True)
def _next_combo(c, n):
    """Advance ``c`` to the next k-combination of range(n); False when done."""
    k = c.shape[0]
    i = k - 1
    while i >= 0 and c[i] == n - k + i:
        i -= 1
    if i < 0:
        return False
    c[i] += 1
    for j in range(i + 1, k):
        c[j] = c[j - 1] + 1
    return True


@njit(cache=True)
def homogeneous_vertices(A, feas_tol, dedup_tol):
    """Vertices of ``{A x <= 0, x >= 0, sum x = 1}``.

    A basis picks ``s`` constraint rows and ``K-1-s`` zero coordinates, so
    only the ``s+1`` free coordinates need solving: ``A_S[:, F] x_F = 0``,
    ``sum x_F = 1``.  Equivalent to :func:`basic_solutions` on ``[A; -I]``.
    """
    d, K = A.shape
    cap = 64
    out = np.empty((cap, K))
    n = 0
    smax = min(d, K - 1)
    x = np.zeros(K)
    for s in range(smax + 1):
        rows = np.arange(s)
        while True:
            free = np.arange(s + 1)
            while True:
                M = np.empty((s + 1, s + 1))
                b = np.zeros(s + 1)
                for i in range(s):
                    for j in range(s + 1):
                        M[i, j] = A[rows[i], free[j]]
                for j in range(s + 1):
                    M[s, j] = 1.0
                b[s] = 1.0
                xf, ok = _solve_square(M, b, SING_TOL)
                if ok:
                    for j in range(K):
                        x[j] = 0.0
                    feasible = True
                    for j in range(s + 1):
                        if xf[j] < -feas_tol:
                            feasible = False
                        x[free[j]] = xf[j]
                    if feasible:
                        for i in range(d):
                            acc = 0.0
                            for j in range(s + 1):
                                acc += A[i, free[j]] * xf[j]
                            if acc > feas_tol:
                                feasible = False
                                break
                    if feasible:
                        dup = False
                        for q in range(n):
                            dmax = 0.0
                            for j in range(K):
                                dd = abs(out[q, j] - x[j])
                                if dd > dmax:
                                    dmax = dd
                            if dmax <= dedup_tol:
                                dup = True
                                break
                        if not dup:
                            if n == cap:
                                bigger = np.empty((2 * cap, K))
                                bigger[:cap] = out
                                out = bigger
                                cap *= 2
                            for j in range(K):
                                out[n, j] = x[j]
                            n += 1
                if not _next_combo(free, K):
                    break
            if s == 0 or not _next_combo(rows, d):
                break
    return out[:n].copy()


@njit(cache=True)
def stacked_rows(A):
    d, K = A.shape
    G = np.zeros((d + K, K))
    for i in range(d):
        for j in range(K):
            G[i, j] = A[i, j]
    for j in range(K):
        G[d + j, j] = -1.0
    return G


@njit(cache=True)
def glr_scan(V, active, G, mu, weights, r, sigma2):
    """Max over r-good vertices of the min pair term against neighbours.

    Returns ``(value, argmax vertex of mu, its neighbours)``; the value is
    clamped at 0 and vertices without neighbours are skipped.
    """
    n, K = V.shape
    vals = np.empty(n)
    for i in range(n):
        s = 0.0
        for a in range(K):
            s += V[i, a] * mu[a]
        vals[i] = s
    top = 0
    for i in range(1, n):
        if vals[i] > vals[top]:
            top = i
    best = 0.0
    top_nbrs = np.empty(0, dtype=np.int64)
    for i in range(n):
        if vals[i] + r < vals[top] - 1e-12 and i != top:
            continue
        nb = neighbors_of(i, active, G)
        if i == top:
            top_nbrs = nb
        if nb.size == 0:
            continue
        pv = pair_values(mu, weights, V[i], V[nb], r, sigma2)
        m = pv.min()
        if m > best:
            best = m
    return best, top, top_nbrs


@njit(cache=True)
def allocation_fw(mu, V, top, nbrs, r, sigma2, p, verts, w0, budget):
    """Frank-Wolfe allocation for vertex ``top`` against ``nbrs`` of ``V``."""
    J = nbrs.shape[0]
    K = V.shape[1]
    V2 = np.empty((J, K))
    c = np.empty(J)
    for j in range(J):
        gap = -r
        for a in range(K):
            v = V[top, a] - V[nbrs[j], a]
            V2[j, a] = v * v
            gap += mu[a] * v
        c[j] = gap * gap / (2.0 * sigma2) if gap > 0.0 else 0.0
    return frank_wolfe(V2, c, p, verts, w0, budget)
