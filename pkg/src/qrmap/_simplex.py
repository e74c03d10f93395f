"""Dense-tableau simplex and the bound-product linear relaxation.

The relaxation shifts the box to the origin, multiplies the bound factors
pairwise into implied quadratic constraints, and replaces every product of
shifted variables by a fresh linear variable. The resulting small LP (at most
14 variables for four base dimensions) is solved by a self-contained primal
simplex; its optimum lower-bounds the quadratic over the rectangle.
"""

from __future__ import annotations

import numpy as np

_TOL = 1e-9


def simplex_min(obj: np.ndarray, G: np.ndarray, h: np.ndarray) -> float:
    """Minimize obj @ x subject to G x <= h, x >= 0, with h >= 0.

    The slack basis is feasible by construction. Returns -inf when the
    problem is unbounded below.
    """
    m, n = G.shape
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = G
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = h
    T[m, :n] = obj
    basis = list(range(n, n + m))
    max_iter = 200 * (n + m)
    for it in range(max_iter):
        row = T[m, : n + m]
        if it < max_iter // 2:
            col = int(np.argmin(row))
            if row[col] >= -_TOL:
                return float(-T[m, -1])
        else:  # Bland's rule guards against cycling
            neg = np.nonzero(row < -_TOL)[0]
            if len(neg) == 0:
                return float(-T[m, -1])
            col = int(neg[0])
        ratios = np.full(m, np.inf)
        pos = T[:m, col] > _TOL
        ratios[pos] = T[:m, -1][pos] / T[:m, col][pos]
        piv = int(np.argmin(ratios))
        if not np.isfinite(ratios[piv]):
            return float("-inf")
        T[piv] /= T[piv, col]
        for r in range(m + 1):
            if r != piv and T[r, col] != 0.0:
                T[r] -= T[r, col] * T[piv]
        basis[piv] = col
    return float(-T[m, -1])


def _pivot(T, basis, piv, col):
    T[piv] /= T[piv, col]
    for r in range(T.shape[0]):
        if r != piv and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[piv]
    basis[piv] = col


def _run_simplex(T, basis, ncols):
    """Optimize the prepared tableau in place over its first ncols columns.

    The last tableau row is the (priced-out) objective. Returns False when
    the problem is unbounded below.
    """
    m = T.shape[0] - 1
    max_iter = 200 * (ncols + m)
    for it in range(max_iter):
        row = T[m, :ncols]
        if it < max_iter // 2:
            col = int(np.argmin(row))
            if row[col] >= -_TOL:
                return True
        else:  # Bland's rule guards against cycling
            neg = np.nonzero(row < -_TOL)[0]
            if len(neg) == 0:
                return True
            col = int(neg[0])
        ratios = np.full(m, np.inf)
        pos = T[:m, col] > _TOL
        ratios[pos] = T[:m, -1][pos] / T[:m, col][pos]
        piv = int(np.argmin(ratios))
        if not np.isfinite(ratios[piv]):
            return False
        _pivot(T, basis, piv, col)
    return True


def simplex_min_general(obj: np.ndarray, G: np.ndarray, h: np.ndarray):
    """Minimize obj @ x subject to G x <= h, x >= 0, h of any sign.

    Two-phase dense-tableau simplex. Returns the optimum, -inf when
    unbounded below, or None when infeasible.
    """
    m, n = G.shape
    neg = h < 0.0
    k = int(neg.sum())
    if k == 0:
        return simplex_min(obj, G, h)
    # Rows with negative rhs are flipped (slack becomes a surplus column)
    # and get an artificial basis variable.
    ncols = n + m + k
    T = np.zeros((m + 1, ncols + 1))
    sgn = np.where(neg, -1.0, 1.0)
    T[:m, :n] = G * sgn[:, None]
    T[:m, n : n + m] = np.diag(sgn)
    T[:m, -1] = h * sgn
    art = np.nonzero(neg)[0]
    basis = list(range(n, n + m))
    for t, r in enumerate(art):
        T[r, n + m + t] = 1.0
        basis[r] = n + m + t
    # Phase 1: drive the artificials to zero.
    T[m, :] = -T[art].sum(axis=0)
    T[m, n + m : -1] = 0.0
    if not _run_simplex(T, basis, ncols):
        return None
    if -T[m, -1] > 1e-7:
        return None
    # Pivot any leftover zero-level artificial out of the basis.
    for r in range(m):
        if basis[r] >= n + m:
            cols = np.nonzero(np.abs(T[r, : n + m]) > _TOL)[0]
            if len(cols):
                _pivot(T, basis, r, int(cols[0]))
    # Phase 2 on the original objective, priced out over the current basis.
    T[m, :] = 0.0
    T[m, :n] = obj
    for r in range(m):
        if basis[r] < n + m and T[m, basis[r]] != 0.0:
            T[m] -= T[m, basis[r]] * T[r]
    if not _run_simplex(T, basis, n + m):
        return float("-inf")
    return float(-T[m, -1])


def _pair_index(n: int):
    idx = {}
    p = 0
    for k in range(n):
        for l in range(k, n):
            idx[(k, l)] = p
            p += 1
    return idx, p


def rlt_lower_bound(A: np.ndarray, b: np.ndarray, c: float, lo: np.ndarray, hi: np.ndarray) -> float:
    """Linear-relaxation lower bound for x^T A x + b^T x + c over [lo, hi]."""
    n = len(b)
    s = hi - lo
    bt = 2.0 * A @ lo + b
    ct = float(lo @ A @ lo + b @ lo + c)
    widx, npair = _pair_index(n)
    nv = n + npair

    obj = np.zeros(nv)
    obj[:n] = bt
    for k in range(n):
        for l in range(k, n):
            obj[n + widx[(k, l)]] = A[k, k] if k == l else 2.0 * A[k, l]

    rows = []
    rhs = []
    # (s_i - z_i)(s_j - z_j) >= 0
    for i in range(n):
        for j in range(i, n):
            r = np.zeros(nv)
            r[i] += s[j]
            r[j] += s[i]
            r[n + widx[(i, j)]] = -1.0
            rows.append(r)
            rhs.append(s[i] * s[j])
    # (s_i - z_i) z_j >= 0
    for i in range(n):
        for j in range(n):
            r = np.zeros(nv)
            r[n + widx[(min(i, j), max(i, j))]] = 1.0
            r[j] -= s[i]
            rows.append(r)
            rhs.append(0.0)
    # z_i <= s_i
    for i in range(n):
        r = np.zeros(nv)
        r[i] = 1.0
        rows.append(r)
        rhs.append(s[i])

    val = simplex_min(obj, np.array(rows), np.array(rhs))
    return val + ct
