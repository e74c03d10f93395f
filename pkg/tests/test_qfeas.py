import numpy as np
import pytest

from qrmap.errors import BudgetExceeded
from qrmap.qfeas import (
    QuadConstraint,
    Rect,
    SolverConfig,
    classify,
    lower_bound,
    solve,
    solve_lp_guided,
)
from qrmap._simplex import simplex_min_general


def random_constraint(rng, n, form=None):
    A = np.zeros((n, n))
    b = rng.normal(0.0, 2.0, n)
    c = rng.normal(0.0, 2.0)
    kind = form if form is not None else rng.integers(0, 5)
    if kind >= 1:
        i, j = rng.choice(n, 2, replace=False)
        if kind == 1:  # bilinear
            A[i, j] = A[j, i] = rng.normal(0.0, 1.0)
        elif kind == 2:  # diagonal
            for k in rng.choice(n, rng.integers(1, n + 1), replace=False):
                A[k, k] = rng.normal(0.0, 1.0)
        elif kind == 3:  # single cross, at most one square
            A[i, j] = A[j, i] = rng.normal(0.0, 1.0)
            A[i, i] = rng.normal(0.0, 1.0)
        else:  # general
            M = rng.normal(0.0, 1.0, (n, n))
            A = 0.5 * (M + M.T)
    return QuadConstraint(A, b, float(c))


def random_rect(rng, n, span=8.0):
    lo = rng.uniform(-span, span, n)
    hi = lo + rng.uniform(0.1, span, n)
    return Rect(lo, hi)


def sampled_min(con, rect, rng, k=2000):
    pts = rng.uniform(rect.lower, rect.upper, (k, len(rect.lower)))
    vals = np.einsum("ki,ij,kj->k", pts, con.A, pts) + pts @ con.b + con.c
    return float(vals.min())


def test_lower_bound_is_valid(seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(500):
        n = int(rng.integers(2, 5))
        con = random_constraint(rng, n)
        rect = random_rect(rng, n)
        lb = lower_bound(con, rect)
        assert lb <= sampled_min(con, rect, rng) + 1e-9


def exact_min_1d_scan(con, rect, grid=20001):
    """Exact-to-tolerance minimum for constraints whose groups have at most
    one squared variable: scan the pivot, minimize others in closed form."""
    from qrmap.qfeas import _components

    plan = _components(con)
    assert plan is not None
    total = con.c
    lo, hi = rect.lower, rect.upper
    n = len(lo)
    grouped = set()
    for pivot, others in plan:
        grouped.update(others)
        grouped.add(pivot if pivot >= 0 else -1)
        if pivot < 0:
            # multilinear group: the box minimum sits at a vertex
            import itertools

            best = np.inf
            for corner in itertools.product(*[(lo[v], hi[v]) for v in others]):
                x = dict(zip(others, corner))
                val = sum(con.b[v] * x[v] for v in others)
                for ii in others:
                    for jj in others:
                        if ii < jj:
                            val += 2.0 * con.A[ii, jj] * x[ii] * x[jj]
                best = min(best, val)
            total += best
            continue
        xs = np.linspace(lo[pivot], hi[pivot], grid)
        vals = con.A[pivot, pivot] * xs * xs + con.b[pivot] * xs
        for v in others:
            coef = 2.0 * con.A[pivot, v] * xs + con.b[v]
            vals += np.minimum(coef * lo[v], coef * hi[v])
        total += float(vals.min())
    for v in range(n):
        if v not in grouped and con.b[v] != 0.0:
            total += min(con.b[v] * lo[v], con.b[v] * hi[v])
    return total


@pytest.mark.parametrize("form", [0, 1, 2, 3])
def test_lower_bound_exact_on_special_forms(form):
    rng = np.random.default_rng(form + 10)
    for _ in range(150):
        n = int(rng.integers(2, 5))
        con = random_constraint(rng, n, form=form)
        rect = random_rect(rng, n, span=4.0)
        lb = lower_bound(con, rect)
        oracle = exact_min_1d_scan(con, rect)
        assert lb <= oracle + 1e-9
        assert lb >= oracle - 1e-6, (classify(con), lb, oracle)


def test_solve_feasible_returns_strict_witness():
    rng = np.random.default_rng(3)
    box = Rect(np.array([-5.0, -5.0]), np.array([5.0, 5.0]))
    for _ in range(100):
        cons = [random_constraint(rng, 2) for _ in range(rng.integers(1, 5))]
        # plant a known interior point by shifting each constant term
        x0 = rng.uniform(-4.0, 4.0, 2)
        cons = [
            QuadConstraint(c.A, c.b, c.c - c.value(x0) - 1.0) for c in cons
        ]
        res = solve(cons, box)
        assert res.feasible
        assert all(c.value(res.witness) < 0.0 for c in cons)


def test_solve_reports_infeasible():
    # x^2 + y^2 < -1 over any box
    con = QuadConstraint(np.eye(2), np.zeros(2), 1.0)
    box = Rect(np.array([-3.0, -3.0]), np.array([3.0, 3.0]))
    res = solve([con], box)
    assert not res.feasible
    # contradictory linear pair: x < -1 and -x < -1
    a = QuadConstraint(np.zeros((2, 2)), np.array([1.0, 0.0]), 1.0)
    b = QuadConstraint(np.zeros((2, 2)), np.array([-1.0, 0.0]), 1.0)
    assert not solve([a, b], box).feasible


def test_solve_budget_exhaustion_raises():
    # thin feasible annulus forces deep subdivision; a tiny cap must trip
    c1 = QuadConstraint(np.eye(2), np.zeros(2), -1.0)
    c2 = QuadConstraint(-np.eye(2), np.zeros(2), 1.0 - 1e-9)
    box = Rect(np.array([-2.0, -2.0]), np.array([2.0, 2.0]))
    with pytest.raises(BudgetExceeded):
        solve([c1, c2], box, SolverConfig(max_depth=60, hard_cap=50))


def test_solve_lp_guided_agrees_with_plain_solve():
    rng = np.random.default_rng(9)
    box = Rect(np.array([-5.0, -5.0]), np.array([5.0, 5.0]))
    agree = 0
    for _ in range(60):
        cons = [random_constraint(rng, 2) for _ in range(rng.integers(1, 4))]
        try:
            r1 = solve(cons, box, SolverConfig(max_depth=16))
            r2 = solve_lp_guided(cons, box, SolverConfig(max_depth=16))
        except BudgetExceeded:
            continue
        assert r1.feasible == r2.feasible
        agree += 1
    assert agree > 40


def test_simplex_matches_scipy():
    from scipy.optimize import linprog

    rng = np.random.default_rng(21)
    checked = 0
    for _ in range(300):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 7))
        obj = rng.normal(0.0, 1.0, n)
        G = rng.normal(0.0, 1.0, (m, n))
        h = rng.normal(0.0, 2.0, m)
        mine = simplex_min_general(obj, G, h)
        # simplex_min_general works in standard form: variables >= 0
        ref = linprog(obj, A_ub=G, b_ub=h, bounds=[(0, None)] * n,
                      method="highs")
        if ref.status == 2:
            assert mine is None or mine == -np.inf
        elif ref.status == 3:
            assert mine == -np.inf
        else:
            checked += 1
            assert mine is not None and np.isfinite(mine)
            assert abs(mine - ref.fun) < 1e-7 * max(1.0, abs(ref.fun))
    assert checked > 80


def test_constraint_validation():
    with pytest.raises(ValueError):
        QuadConstraint(np.array([[0.0, 1.0], [0.0, 0.0]]), np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        Rect(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        SolverConfig(max_depth=0)
