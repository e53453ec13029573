"""Independent reference implementations used only by the tests.

Each oracle is written directly from the defining formula with plain loops,
sharing no code with the package.
"""
from __future__ import annotations

import itertools

import numpy as np


def literal_v_hat(phi_nn_by_t, p, L, v):
    """Estimated number of selected nulls, one term at a time.

    ``phi_nn_by_t[t-1][j]`` is the penalized occurrence of variable ``j``
    after ``t`` dummies, for ``t = 1..T``; occurrences at ``t = 0`` are 0.
    A ``t``-term whose denominator is zero contributes nothing.
    """
    T = len(phi_nn_by_t)
    final = phi_nn_by_t[T - 1]
    A_v = [j for j in range(p) if final[j] > v]
    A_half = [j for j in range(p) if final[j] > 0.5]
    first = 0.0
    for j in A_v:
        first += 1.0 - final[j]
    second = 0.0
    for t in range(1, T + 1):
        prev = [0.0] * p if t == 1 else phi_nn_by_t[t - 2]
        cur = phi_nn_by_t[t - 1]
        total = 0.0
        for q in range(p):
            total += cur[q]
        weight = (p - total) / (L - t + 1)
        num = 0.0
        for j in A_v:
            num += cur[j] - prev[j]
        den = 0.0
        for j in A_half:
            den += cur[j] - prev[j]
        if den != 0.0:
            second += weight * num / den
    return first + second, second, len(A_v)


def literal_penalty(phi, corr, rho):
    """Penalty factors from the group definition, element by element."""
    p = len(phi)
    out = []
    for j in range(p):
        group = [q for q in range(p) if q != j and abs(corr[j][q]) >= rho]
        if not group:
            out.append(0.5)
            continue
        closest = min(abs(phi[j] - phi[q]) for q in group)
        out.append(1.0 / (2.0 - closest))
    return out


def brute_lar_order(Z, y, max_entries=None):
    """Least angle regression by explicit piecewise-linear homotopy.

    The coefficient vector is tracked explicitly and all correlations are
    recomputed from the residual at every breakpoint. The next breakpoint
    is found by solving, for every inactive column and both signs, the
    scalar equation at which that column's absolute correlation catches up
    with the active one, using the equiangular direction from the normal
    equations of the active columns. Returns the entry order.
    """
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = Z.shape
    beta = np.zeros(m)
    order = []
    limit = min(m, n - 1) if max_entries is None else min(max_entries, m, n - 1)
    corr = Z.T @ y
    first = int(np.argmax(np.abs(corr)))
    order.append(first)
    while len(order) < limit:
        resid = y - Z @ beta
        corr = Z.T @ resid
        A = list(order)
        C = np.max(np.abs(corr[A]))
        s = np.sign(corr[A])
        G = Z[:, A].T @ Z[:, A]
        d_A = np.linalg.solve(G, s)  # direction with Z_A' Z_A d = s, shrinking all |c_A| at unit rate
        step_dir = Z[:, A] @ d_A
        best = (np.inf, None)
        for j in range(m):
            if j in A:
                continue
            a_j = Z[:, j] @ step_dir
            for sign in (1.0, -1.0):
                # sign * (corr_j - g a_j) == C - g
                den = 1.0 - sign * a_j
                if abs(den) < 1e-15:
                    continue
                g = (C - sign * corr[j]) / den
                if 1e-13 * max(1.0, C) < g < best[0] - 1e-12 * max(1.0, C):
                    best = (g, j)
        g, j = best
        if j is None or g >= C:
            break
        beta[A] += g * d_A
        order.append(j)
    return order


def simplex_grid(s, step=0.01):
    """All points of the ``s``-simplex whose coordinates are multiples of ``step``."""
    m = round(1.0 / step)
    pts = []
    for comb in itertools.combinations(range(m + s - 1), s - 1):
        parts = []
        prev = -1
        for c in comb:
            parts.append(c - prev - 1)
            prev = c
        parts.append(m + s - 2 - prev)
        pts.append(parts)
    return np.asarray(pts, dtype=float) / m


def grid_qp_min(X, y, lam, step=0.01):
    W = simplex_grid(X.shape[1], step)
    R = y[None, :] - W @ X.T
    obj = np.einsum("ij,ij->i", R, R) + lam * np.einsum("ij,ij->i", W, W)
    k = int(np.argmin(obj))
    return float(obj[k]), W[k]
