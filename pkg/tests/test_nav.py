import numpy as np
import pytest

from qrmap.errors import NoPath, StuckDetected
from qrmap.nav import (
    RngEstimate,
    dump_rng,
    estimate_rng,
    navigate,
    plan_route,
    trajectory_csv,
)

from test_qmap import build_converged_map, build_truth_map


def geometric_rng(landmarks):
    """Brute-force RNG: edge iff no third point is in the open lune."""
    ids = sorted(landmarks)
    edges = set()
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            pa, pb = np.asarray(landmarks[a]), np.asarray(landmarks[b])
            dab = np.hypot(*(pa - pb))
            ok = True
            for c in ids:
                if c in (a, b):
                    continue
                pc = np.asarray(landmarks[c])
                if max(np.hypot(*(pa - pc)), np.hypot(*(pb - pc))) < dab:
                    ok = False
                    break
            if ok:
                edges.add((a, b))
    return edges


def test_rng_zero_cost_edges_match_geometry(tables):
    table, labeling = tables
    for seed in (5, 6, 7):
        rng = np.random.default_rng(seed)
        landmarks = {i + 1: rng.uniform(0, 60, 2) for i in range(6)}
        qmap = build_truth_map(landmarks, table, labeling)
        est = estimate_rng(qmap)
        zero = {e for e, w in est.weights.items() if w == 0.0}
        assert zero == geometric_rng(landmarks)


def test_rng_requires_two_nodes(tables):
    table, labeling = tables
    _, qmap = build_converged_map(8, 4, table, labeling, n_images=2)
    est = estimate_rng(qmap)
    assert est.total_cost() >= 0.0
    from qrmap.qmap import QualMap

    with pytest.raises(ValueError):
        estimate_rng(QualMap())


def test_plan_route_shortest_and_weighted():
    est = RngEstimate(
        nodes=[1, 2, 3, 4],
        weights={(1, 2): 0.0, (2, 4): 0.0, (1, 3): 0.9, (3, 4): 0.9},
    )
    plan = plan_route(est, 1, 4, lam=0.0)
    assert plan.hops in ([1, 2, 4], [1, 3, 4])
    plan = plan_route(est, 1, 4, lam=5.0)
    assert plan.hops == [1, 2, 4]  # avoid costly lune edges
    assert plan.total_cost == pytest.approx(2.0)
    assert plan_route(est, 2, 2).hops == [2]


def test_plan_route_no_path():
    est = RngEstimate(nodes=[1, 2, 3], weights={(1, 2): 0.0})
    with pytest.raises(NoPath):
        plan_route(est, 1, 3)
    with pytest.raises(NoPath):
        plan_route(est, 1, 9)


def test_navigate_reaches_goal_cell(tables):
    table, labeling = tables
    landmarks, qmap = build_converged_map(9, 6, table, labeling)
    est = estimate_rng(qmap)
    rng = np.random.default_rng(1)
    for _ in range(5):
        start = rng.uniform(0, 60, 2)
        goal = rng.uniform(0, 60, 2)
        traj = navigate(landmarks, est, start, goal, step_size=0.5)
        end = np.array([traj[-1].x, traj[-1].y])
        dists = {lm: np.hypot(*(np.asarray(p) - end))
                 for lm, p in landmarks.items()}
        goal_lm = min(dists, key=dists.get)
        gd = {lm: np.hypot(*(np.asarray(p) - goal))
              for lm, p in landmarks.items()}
        assert goal_lm == min(gd, key=gd.get)


def test_navigate_step_budget():
    landmarks = {1: (0.0, 0.0), 2: (100.0, 0.0)}
    est = RngEstimate(nodes=[1, 2], weights={(1, 2): 0.0})
    with pytest.raises(StuckDetected):
        navigate(landmarks, est, (1.0, 0.0), (99.0, 0.0),
                 step_size=0.001, max_steps=10)


def test_dump_formats():
    est = RngEstimate(nodes=[1, 2], weights={(1, 2): 0.25})
    assert dump_rng(est) == "1 2 0.250000000\n"
    landmarks = {1: (0.0, 0.0), 2: (3.0, 0.0)}
    traj = navigate(landmarks, est, (0.5, 0.0), (3.0, 0.0), step_size=1.0)
    text = trajectory_csv(traj)
    assert text.splitlines()[0] == "step,x,y,target"
    assert len(text.splitlines()) == len(traj) + 1
