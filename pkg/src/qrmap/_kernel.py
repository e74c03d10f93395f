"""Compiled inner loop of the rectangle branch-and-bound feasibility search.

Constraints arrive as dense symmetric quadratics. Each carries a bounding
method: either a "component plan" (a partition of its variables into groups
that interact through cross terms, each group having at most one squared
variable, whose exact box minimum is a corner enumeration plus a closed-form
1-D minimization) or plain interval arithmetic when no such plan exists.

The kernel distinguishes the first m0 constraints (the real system, used to
test candidate points) from optional trailing surrogate constraints (pairwise
sums of real ones, used for pruning only: any point of the feasible set makes
every pairwise sum negative, and bounding a sum detects two-constraint
conflicts that per-constraint bounds cannot).
"""

import numpy as np
from numba import njit

METHOD_PLAN = 0
METHOD_INTERVAL = 1


@njit(cache=True)
def _eval_q(A, b, c, m, x):
    n = x.shape[0]
    v = c[m]
    for i in range(n):
        v += b[m, i] * x[i]
        v += A[m, i, i] * x[i] * x[i]
        for j in range(i + 1, n):
            v += 2.0 * A[m, i, j] * x[i] * x[j]
    return v


@njit(cache=True)
def _quad1d_min(a, bb, L, U):
    vL = a * L * L + bb * L
    vU = a * U * U + bb * U
    best = vL if vL < vU else vU
    if a > 0.0:
        t = -bb / (2.0 * a)
        if L < t < U:
            vt = a * t * t + bb * t
            if vt < best:
                best = vt
    return best


@njit(cache=True)
def _comp_bound(A, b, m, pivot, vars_, lo, hi):
    """Exact minimum of one variable-group of constraint m over the box."""
    nvars = vars_.shape[0]
    ncorner = 1 << nvars
    best = np.inf
    xv = np.empty(nvars)
    for mask in range(ncorner):
        for t in range(nvars):
            v = vars_[t]
            xv[t] = hi[v] if (mask >> t) & 1 else lo[v]
        val = 0.0
        for t in range(nvars):
            v = vars_[t]
            val += b[m, v] * xv[t]
            for u in range(t + 1, nvars):
                val += 2.0 * A[m, v, vars_[u]] * xv[t] * xv[u]
        if pivot >= 0:
            a = A[m, pivot, pivot]
            bb = b[m, pivot]
            for t in range(nvars):
                bb += 2.0 * A[m, pivot, vars_[t]] * xv[t]
            val += _quad1d_min(a, bb, lo[pivot], hi[pivot])
        if val < best:
            best = val
    return best


@njit(cache=True)
def _interval_bound(A, b, c, m, lo, hi):
    """Termwise interval lower bound; valid for any quadratic."""
    n = lo.shape[0]
    total = c[m]
    for i in range(n):
        bi = b[m, i]
        if bi != 0.0:
            v1 = bi * lo[i]
            v2 = bi * hi[i]
            total += v1 if v1 < v2 else v2
        aii = A[m, i, i]
        if aii != 0.0:
            v1 = aii * lo[i] * lo[i]
            v2 = aii * hi[i] * hi[i]
            mn = v1 if v1 < v2 else v2
            if aii > 0.0 and lo[i] < 0.0 < hi[i]:
                mn = 0.0
            total += mn
        for j in range(i + 1, n):
            aij = 2.0 * A[m, i, j]
            if aij != 0.0:
                best = aij * lo[i] * lo[j]
                v = aij * lo[i] * hi[j]
                if v < best:
                    best = v
                v = aij * hi[i] * lo[j]
                if v < best:
                    best = v
                v = aij * hi[i] * hi[j]
                if v < best:
                    best = v
                total += best
    return total


@njit(cache=True)
def _lower_bound(A, b, c, m, method, comp_ptr, comp_pivot, comp_var_ptr,
                 comp_vars, lo, hi):
    if method[m] == METHOD_INTERVAL:
        return _interval_bound(A, b, c, m, lo, hi)
    total = c[m]
    for ci in range(comp_ptr[m], comp_ptr[m + 1]):
        vs = comp_vars[comp_var_ptr[ci] : comp_var_ptr[ci + 1]]
        total += _comp_bound(A, b, m, comp_pivot[ci], vs, lo, hi)
    return total


@njit(cache=True)
def _prunable(A, b, c, method, comp_ptr, comp_pivot, comp_var_ptr, comp_vars,
              lo, hi):
    for m in range(A.shape[0]):
        lb = _lower_bound(A, b, c, m, method, comp_ptr, comp_pivot,
                          comp_var_ptr, comp_vars, lo, hi)
        if lb >= 0.0:
            return True
    return False


@njit(cache=True)
def _all_strict(A, b, c, m0, x):
    for m in range(m0):
        if _eval_q(A, b, c, m, x) >= 0.0:
            return False
    return True


@njit(cache=True)
def shrink_box(A, b, c, method, comp_ptr, comp_pivot, comp_var_ptr, comp_vars,
               lo, hi, passes, steps):
    """Bisection reduction of the root box: discard a half-interval of one
    variable whenever some constraint's lower bound proves it empty.
    Returns False if the whole box is pruned."""
    n = lo.shape[0]
    l2 = np.empty(n)
    h2 = np.empty(n)
    for _ in range(passes):
        for i in range(n):
            for _ in range(steps):
                mid = 0.5 * (lo[i] + hi[i])
                for k in range(n):
                    l2[k] = lo[k]
                    h2[k] = hi[k]
                h2[i] = mid
                if _prunable(A, b, c, method, comp_ptr, comp_pivot,
                             comp_var_ptr, comp_vars, l2, h2):
                    lo[i] = mid
                else:
                    break
            for _ in range(steps):
                mid = 0.5 * (lo[i] + hi[i])
                for k in range(n):
                    l2[k] = lo[k]
                    h2[k] = hi[k]
                l2[i] = mid
                if _prunable(A, b, c, method, comp_ptr, comp_pivot,
                             comp_var_ptr, comp_vars, l2, h2):
                    hi[i] = mid
                else:
                    break
            if lo[i] >= hi[i]:
                return False
    return True


@njit(cache=True)
def solve_kernel(A, b, c, m0, method, comp_ptr, comp_pivot, comp_var_ptr,
                 comp_vars, lo0, hi0, max_depth, eps_vol, seed, hard_cap,
                 do_shrink):
    """Depth-first rectangle search.

    Returns (status, witness, explored, abandoned). status: 1 feasible
    (witness strict for the first m0 constraints), 0 exhausted, 2 hard
    rectangle cap passed. abandoned counts rectangles dropped at the
    depth/volume cutoff without a pruning proof; an exhausted search is a
    genuine infeasibility certificate only when that count is zero.
    """
    n = lo0.shape[0]
    np.random.seed(seed)
    lo = lo0.copy()
    hi = hi0.copy()
    x = np.empty(n)
    abandoned = 0
    if do_shrink != 0:
        if not shrink_box(A, b, c, method, comp_ptr, comp_pivot, comp_var_ptr,
                          comp_vars, lo, hi, 3, 40):
            return 0, x, 0, abandoned
    cap = max_depth + 4
    stack_lo = np.empty((cap, n))
    stack_hi = np.empty((cap, n))
    stack_d = np.empty(cap, np.int64)
    stack_lo[0] = lo
    stack_hi[0] = hi
    stack_d[0] = 0
    top = 1
    explored = 0
    while top > 0:
        top -= 1
        lo = stack_lo[top].copy()
        hi = stack_hi[top].copy()
        d = stack_d[top]
        explored += 1
        if explored > hard_cap:
            return 2, x, explored, abandoned
        for i in range(n):
            x[i] = 0.5 * (lo[i] + hi[i])
        if _all_strict(A, b, c, m0, x):
            return 1, x, explored, abandoned
        for i in range(n):
            x[i] = lo[i] + np.random.random() * (hi[i] - lo[i])
        if _all_strict(A, b, c, m0, x):
            return 1, x, explored, abandoned
        if d >= max_depth:
            abandoned += 1
            continue
        vol = 1.0
        for i in range(n):
            vol *= hi[i] - lo[i]
        if vol < eps_vol:
            abandoned += 1
            continue
        if _prunable(A, b, c, method, comp_ptr, comp_pivot, comp_var_ptr,
                     comp_vars, lo, hi):
            continue
        k = 0
        w = hi[0] - lo[0]
        for i in range(1, n):
            if hi[i] - lo[i] > w:
                w = hi[i] - lo[i]
                k = i
        mid = 0.5 * (lo[k] + hi[k])
        stack_lo[top] = lo
        stack_hi[top] = hi
        stack_hi[top, k] = mid
        stack_d[top] = d + 1
        stack_lo[top + 1] = lo
        stack_lo[top + 1, k] = mid
        stack_hi[top + 1] = hi
        stack_d[top + 1] = d + 1
        top += 2
    return 0, x, explored, abandoned
