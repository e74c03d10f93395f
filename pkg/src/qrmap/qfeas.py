"""Feasibility of systems of strict quadratic inequalities over a box.

Each constraint is x^T A x + b^T x + c < 0. The solver splits the search
rectangle along its longest edge, discards rectangles on which some
constraint's lower bound is non-negative, and accepts the first strictly
feasible candidate point. Lower bounds are exact for the linear, bilinear,
diagonal and single-cross forms; general quadratics fall back to the
bound-product linear relaxation unless they decompose into independently
boundable variable groups.

Some systems resist per-constraint pruning: joint conflicts between several
constraints leave every single bound negative on rectangles straddling the
conflict, and the subdivision degenerates. For those, `solve_lp_guided`
prunes rectangles by a linear-programming certificate instead: an upper
bound on the best achievable satisfaction margin, computed from the lifted
relaxation of all constraints at once plus products of the linear ones. A
rectangle whose relaxed margin is non-positive contains no strictly feasible
point and is discarded whole.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import _kernel
from ._simplex import rlt_lower_bound, simplex_min_general
from .errors import BudgetExceeded

FORM_LINEAR = "linear"
FORM_BILINEAR = "bilinear"
FORM_DIAGONAL = "diagonal-quadratic"
FORM_SINGLE_CROSS = "single-cross"
FORM_GENERAL = "general"


@dataclass(frozen=True)
class QuadConstraint:
    """One strict inequality x^T A x + b^T x + c < 0 with A symmetric."""

    A: np.ndarray
    b: np.ndarray
    c: float

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if A.shape != (len(b), len(b)):
            raise ValueError("A/b dimension mismatch")
        if not np.allclose(A, A.T, atol=1e-12):
            raise ValueError("A must be symmetric")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def form(self) -> str:
        return classify(self)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.A @ x + self.b @ x + self.c)


@dataclass
class Rect:
    """Axis-aligned search rectangle with its subdivision depth."""

    lower: np.ndarray
    upper: np.ndarray
    depth: int = 0

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if not np.all(self.lower < self.upper):
            raise ValueError("rectangle must have lower < upper componentwise")
        if self.depth < 0:
            raise ValueError("depth must be non-negative")


@dataclass
class SolverConfig:
    max_depth: int = 30
    eps_volume: float = 1e-30
    rng_seed: int = 0
    hard_cap: int = 5_000_000
    # Optional accelerators, sound in both directions: surrogate pairwise-sum
    # constraints strengthen pruning, and root box reduction discards only
    # half-intervals proven empty by the same bounds.
    pair_sums: bool = False
    shrink_root: bool = False

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.eps_volume <= 0.0:
            raise ValueError("eps_volume must be positive")


@dataclass
class FeasibilityResult:
    feasible: bool
    witness: Optional[np.ndarray]
    rectangles_explored: int
    #: True when the outcome is a certificate: a strict witness, or an
    #: exhaustive search in which every discarded rectangle carried a pruning
    #: proof. False means some rectangles were abandoned at the depth/volume
    #: cutoff, so an infeasible verdict is a heuristic, not a proof.
    resolved: bool = True


def classify(con: QuadConstraint) -> str:
    """Most specific of the five constraint forms."""
    A = con.A
    n = A.shape[0]
    diag = [i for i in range(n) if A[i, i] != 0.0]
    cross = [(i, j) for i in range(n) for j in range(i + 1, n) if A[i, j] != 0.0]
    if not diag and not cross:
        return FORM_LINEAR
    if not diag:
        return FORM_BILINEAR
    if not cross:
        return FORM_DIAGONAL
    if len(cross) == 1 and len(diag) <= 1:
        return FORM_SINGLE_CROSS
    return FORM_GENERAL


def _components(con: QuadConstraint) -> List[Tuple[int, List[int]]]:
    """Variable groups linked by cross terms, as (pivot, other vars).

    pivot is the group's squared variable (-1 if none); returns None when
    some group has two or more squared variables, i.e. no closed form.
    """
    A, b = con.A, con.b
    n = A.shape[0]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if A[i, j] != 0.0:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        if A[i, i] != 0.0 or b[i] != 0.0 or any(
            A[i, j] != 0.0 for j in range(n) if j != i
        ):
            groups.setdefault(find(i), []).append(i)
    plan = []
    for vs in groups.values():
        pivots = [v for v in vs if A[v, v] != 0.0]
        if len(pivots) > 1:
            return None
        pivot = pivots[0] if pivots else -1
        plan.append((pivot, [v for v in vs if v != pivot]))
    return plan


def lower_bound(con: QuadConstraint, rect: Rect) -> float:
    """A value <= min of the constraint expression over the rectangle.

    Exact whenever the constraint decomposes into groups with at most one
    squared variable each (which covers the four special forms); otherwise
    the bound-product linear relaxation is used.
    """
    plan = _components(con)
    if plan is not None:
        total = con.c
        for pivot, others in plan:
            total += _kernel._comp_bound(
                con.A[None, :, :],
                con.b[None, :],
                0,
                pivot,
                np.asarray(others, dtype=np.int32),
                rect.lower,
                rect.upper,
            )
        return float(total)
    return float(rlt_lower_bound(con.A, con.b, con.c, rect.lower, rect.upper))


def _pack_plans(A: np.ndarray, b: np.ndarray):
    """Flatten component plans for the compiled kernel.

    Constraints without a plan (some group holding two squared variables)
    are marked for termwise interval bounding instead.
    """
    method = np.zeros(A.shape[0], dtype=np.int8)
    comp_ptr = [0]
    comp_pivot = []
    comp_var_ptr = [0]
    comp_vars = []
    for m in range(A.shape[0]):
        plan = _components(QuadConstraint(A[m], b[m], 0.0))
        if plan is None:
            method[m] = _kernel.METHOD_INTERVAL
        else:
            for pivot, others in plan:
                comp_pivot.append(pivot)
                comp_vars.extend(others)
                comp_var_ptr.append(len(comp_vars))
        comp_ptr.append(len(comp_pivot))
    return (
        method,
        np.asarray(comp_ptr, dtype=np.int64),
        np.asarray(comp_pivot, dtype=np.int32),
        np.asarray(comp_var_ptr, dtype=np.int64),
        np.asarray(comp_vars, dtype=np.int32),
    )


def _with_pair_sums(A, b, c):
    """Append the pairwise sums of all constraints as pruning surrogates."""
    m0 = A.shape[0]
    As, bs, cs = list(A), list(b), list(c)
    for p in range(m0):
        for q in range(p + 1, m0):
            Apq = A[p] + A[q]
            bpq = b[p] + b[q]
            if np.any(Apq != 0.0) or np.any(bpq != 0.0):
                As.append(Apq)
                bs.append(bpq)
                cs.append(c[p] + c[q])
    return np.stack(As), np.stack(bs), np.asarray(cs)


def solve(
    constraints: Sequence[QuadConstraint],
    box: Rect,
    cfg: SolverConfig = SolverConfig(),
) -> FeasibilityResult:
    """Decide strict feasibility of the constraint system over the box.

    TRUE comes with a strictly feasible witness. FALSE with resolved=True is
    a proof: every rectangle was pruned by a constraint bound. FALSE with
    resolved=False means some rectangles were abandoned at the depth/volume
    cutoff; for full-dimensional feasible sets that is still good evidence of
    infeasibility, but thin feasible slivers can hide below the cutoff, so
    soundness-critical callers must treat it as undecided.
    """
    n = len(box.lower)
    for con in constraints:
        if len(con.b) != n:
            raise ValueError("constraint dimension does not match box")
    if not constraints:
        return FeasibilityResult(True, 0.5 * (box.lower + box.upper), 0)
    A = np.stack([c.A for c in constraints])
    b = np.stack([c.b for c in constraints])
    c = np.asarray([c.c for c in constraints], dtype=float)
    m0 = A.shape[0]
    if cfg.pair_sums:
        A, b, c = _with_pair_sums(A, b, c)
    packed = _pack_plans(A, b)
    status, witness, explored, abandoned = _kernel.solve_kernel(
        A, b, c, m0, *packed,
        box.lower, box.upper,
        cfg.max_depth, cfg.eps_volume,
        cfg.rng_seed & 0x7FFFFFFF, cfg.hard_cap,
        1 if cfg.shrink_root else 0,
    )
    if status == 2:
        raise BudgetExceeded(f"explored {explored} rectangles")
    if status == 1:
        return FeasibilityResult(True, witness.copy(), explored)
    return FeasibilityResult(False, None, explored, resolved=abandoned == 0)


class _MarginLP:
    """Upper bound on max_x min_m (-q_m(x)) over a rectangle, by LP.

    Variables are the box-shifted coordinates z = x - lo, the lifted products
    w_ij ~ z_i z_j, and the margin t. Rows: every constraint with its t slack,
    the bound-factor product (McCormick) envelope of each w_ij, and the lifted
    pairwise products of the linear constraints (p <= 0 and q <= 0 imply
    p*q >= 0, which is linear in w). A non-positive optimum certifies that no
    strictly feasible point exists in the rectangle.
    """

    def __init__(self, constraints: Sequence[QuadConstraint]):
        n = len(constraints[0].b)
        self.n = n
        self.pairs = [(i, j) for i in range(n) for j in range(i, n)]
        self.npair = len(self.pairs)
        exprs = [(con.A, con.b, con.c, 1.0) for con in constraints]
        lin = [(con.b, con.c) for con in constraints if not np.any(con.A != 0.0)]
        for a in range(len(lin)):
            for b in range(a + 1, len(lin)):
                b1, c1 = lin[a]
                b2, c2 = lin[b]
                Ap = -0.5 * (np.outer(b1, b2) + np.outer(b2, b1))
                exprs.append((Ap, -(c1 * b2 + c2 * b1), -c1 * c2, 0.0))
        self.A = np.stack([e[0] for e in exprs])
        self.b = np.stack([e[1] for e in exprs])
        self.c = np.asarray([e[2] for e in exprs])
        self.tcol = np.asarray([e[3] for e in exprs])
        wcoef = np.zeros((len(exprs), self.npair))
        for k, (i, j) in enumerate(self.pairs):
            wcoef[:, k] = self.A[:, i, i] if i == j else 2.0 * self.A[:, i, j]
        self.wcoef = wcoef

    def _rows(self, lo: np.ndarray, hi: np.ndarray):
        """Constraint rows over (z, w, t) shared by both LP backends."""
        n, npair = self.n, self.npair
        s = hi - lo
        nv = n + npair + 1
        R = self.A.shape[0]
        zcoef = 2.0 * np.einsum("mij,j->mi", self.A, lo) + self.b
        rhs = -(np.einsum("i,mij,j->m", lo, self.A, lo) + self.b @ lo + self.c)
        rows = np.zeros((R + 3 * npair, nv))
        bub = np.zeros(R + 3 * npair)
        rows[:R, :n] = zcoef
        rows[:R, n : n + npair] = self.wcoef
        rows[:R, -1] = self.tcol
        bub[:R] = rhs
        r = R
        for k, (i, j) in enumerate(self.pairs):
            rows[r, i] += s[j]
            rows[r, j] += s[i]
            rows[r, n + k] = -1.0
            bub[r] = s[i] * s[j]
            r += 1
            rows[r, n + k] = 1.0
            rows[r, j] -= s[i]
            r += 1
            if i != j:
                rows[r, n + k] = 1.0
                rows[r, i] -= s[j]
                r += 1
        return rows[:r], bub[:r], s

    def margin(self, lo: np.ndarray, hi: np.ndarray) -> float:
        n, npair = self.n, self.npair
        rows, bub, s = self._rows(lo, hi)
        if n <= 2:
            # Small problems: the in-package tableau simplex beats the
            # external solver's call overhead. t is split as u - v >= 0 and
            # the z upper bounds become explicit rows.
            r, nv = rows.shape
            G = np.zeros((r + n, nv + 1))
            G[:r, :nv] = rows
            G[:r, -1] = -rows[:, -1]
            h = np.concatenate([bub, s])
            for i in range(n):
                G[r + i, i] = 1.0
            obj = np.zeros(nv + 1)
            obj[-2] = -1.0
            obj[-1] = 1.0
            val = simplex_min_general(obj, G, h)
            if val is None:
                return -np.inf
            if val == float("-inf"):
                return np.inf
            return -val
        from scipy.optimize import linprog

        obj = np.zeros(rows.shape[1])
        obj[-1] = -1.0
        bounds = (
            [(0.0, s[i]) for i in range(n)]
            + [(0.0, None)] * npair
            + [(None, None)]
        )
        res = linprog(obj, A_ub=rows, b_ub=bub, bounds=bounds, method="highs")
        if res.status == 2:
            return -np.inf
        if res.status == 0:
            return float(-res.fun)
        return np.inf


def solve_lp_guided(
    constraints: Sequence[QuadConstraint],
    box: Rect,
    cfg: SolverConfig = SolverConfig(),
    margin_threshold: float = 1e-6,
) -> FeasibilityResult:
    """Rectangle search pruned by the LP margin certificate.

    Same depth semantics as `solve`, but suited to systems whose infeasibility
    is a joint property of several constraints. The threshold guards the
    certificate against relaxation round-off; it is far below the satisfaction
    margin of any witnessed system in this problem family.
    """
    n = len(box.lower)
    for con in constraints:
        if len(con.b) != n:
            raise ValueError("constraint dimension does not match box")
    mlp = _MarginLP(constraints)
    A = np.stack([c.A for c in constraints])
    b = np.stack([c.b for c in constraints])
    c = np.asarray([c.c for c in constraints], dtype=float)
    if cfg.pair_sums:
        Ap, bp, cp = _with_pair_sums(A, b, c)
    else:
        Ap, bp, cp = A, b, c
    method, comp_ptr, comp_pivot, comp_var_ptr, comp_vars = _pack_plans(Ap, bp)
    lo0, hi0 = box.lower.copy(), box.upper.copy()
    if cfg.shrink_root:
        if not _kernel.shrink_box(Ap, bp, cp, method, comp_ptr, comp_pivot,
                                  comp_var_ptr, comp_vars, lo0, hi0, 3, 40):
            return FeasibilityResult(False, None, 0)
    rng = np.random.default_rng(cfg.rng_seed)
    stack = [(lo0, hi0, box.depth)]
    explored = 0
    abandoned = 0
    while stack:
        lo, hi, d = stack.pop()
        explored += 1
        if explored > cfg.hard_cap:
            raise BudgetExceeded(f"explored {explored} rectangles")
        x = 0.5 * (lo + hi)
        if all(con.value(x) < 0.0 for con in constraints):
            return FeasibilityResult(True, x, explored)
        x = lo + rng.random(n) * (hi - lo)
        if all(con.value(x) < 0.0 for con in constraints):
            return FeasibilityResult(True, x, explored)
        if d >= cfg.max_depth or np.prod(hi - lo) < cfg.eps_volume:
            abandoned += 1
            continue
        if _kernel._prunable(Ap, bp, cp, method, comp_ptr, comp_pivot,
                             comp_var_ptr, comp_vars, lo, hi):
            continue
        if mlp.margin(lo, hi) <= margin_threshold:
            continue
        k = int(np.argmax(hi - lo))
        mid = 0.5 * (lo[k] + hi[k])
        h2 = hi.copy()
        h2[k] = mid
        l2 = lo.copy()
        l2[k] = mid
        stack.append((lo, h2, d + 1))
        stack.append((l2, hi, d + 1))
    return FeasibilityResult(False, None, explored, resolved=abandoned == 0)


