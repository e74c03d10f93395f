"""End-to-end acceptance checks, one test per shipped guarantee.

These run against the packaged composition-table artifact and exercise the
full pipeline at desk scale: labeling bootstrap, table soundness, measurement
soundness, solver bound quality, map convergence, fusion order independence,
RNG equivalence, Monte Carlo trends, and navigation arrival.
"""

import math
import time

import numpy as np

from qrmap._table1 import UNARY_ROWS
from qrmap.edc import derive_region_labels, region_of_points
from qrmap.errors import DegenerateTriple
from qrmap.harness import CampaignConfig, gen_world, run_mc, run_sim
from qrmap.measurement import measure_triple, observe_world
from qrmap.nav import estimate_rng, navigate
from qrmap.operators import apply_inverse, apply_left, compose
from qrmap.qfeas import lower_bound
from qrmap.qmap import QualMap, dump_map, fuse
from qrmap.states import StateSet

from test_edc import random_triples
from test_measurement import observe
from test_nav import geometric_rng
from test_qfeas import exact_min_1d_scan, random_constraint, random_rect
from test_qmap import build_truth_map


def test_criterion_01_labeling_bootstrap_under_one_minute():
    t0 = time.time()
    labeling = derive_region_labels()
    elapsed = time.time() - t0
    assert sorted(labeling.by_region) == list(range(1, 21))
    assert len(set(labeling.by_region.values())) == 20
    # regenerated unary images agree with the tabled rows, multi-valued
    # entries included: collect the geometric images per region
    left = {r: set() for r in range(1, 21)}
    right = {r: set() for r in range(1, 21)}
    inv = {r: set() for r in range(1, 21)}
    for a, b, c in random_triples(3000, seed=1):
        r = region_of_points(a, b, c, labeling)
        left[r].add(region_of_points(b, c, a, labeling))
        right[r].add(region_of_points(c, a, b, labeling))
        inv[r].add(region_of_points(b, a, c, labeling))
    for r, (tl, tr, ti) in UNARY_ROWS.items():
        assert left[r] <= set(tl) and right[r] <= set(tr) and inv[r] <= {ti}
        assert left[r] and right[r] and inv[r]
    # every multi-valued row is actually realized in full
    multi = [r for r, (tl, tr, _) in UNARY_ROWS.items()
             if len(tl) > 1 or len(tr) > 1]
    for r in multi:
        assert left[r] == set(UNARY_ROWS[r][0])
        assert right[r] == set(UNARY_ROWS[r][1])
    assert elapsed < 60.0, f"bootstrap took {elapsed:.1f}s"


def test_criterion_02_worked_example_closure(tables):
    table, _ = tables
    got = compose(apply_left(StateSet({6, 7})), apply_inverse(StateSet({16})),
                  table)
    assert got == StateSet({1, 5, 11, 12, 17, 18, 19, 20})
    assert table.entry(1, 5) == StateSet({1, 5, 11, 12, 17, 19})
    assert table.entry(5, 5) == StateSet({12, 17, 18, 19, 20})
    assert table.entry(11, 5) == StateSet({17, 18, 19, 20})


def test_criterion_03_composition_table_soundness(tables):
    table, labeling = tables
    # the table ships as a repo artifact, generated offline at depth 60
    # with zero budget-flagged cells
    assert table.depth >= 60
    assert not table.flagged
    rng = np.random.default_rng(300)
    checked = 0
    while checked < 1000:
        a, b, c, d = rng.uniform(-20.0, 20.0, (4, 2))
        try:
            s1 = region_of_points(a, b, c, labeling)
            s2 = region_of_points(b, c, d, labeling)
            s3 = region_of_points(a, b, d, labeling)
        except DegenerateTriple:
            continue
        assert s3 in table.entry(s1, s2), (s1, s2, s3)
        checked += 1


def _random_observation(rng):
    while True:
        robot = rng.uniform(-15.0, 15.0, 2)
        pts = rng.uniform(-15.0, 15.0, (3, 2))
        d = [float(np.hypot(*(p - robot))) for p in pts]
        if min(d) < 1e-6:
            continue
        if min(abs(d[i] - d[j])
               for i in range(3) for j in range(i + 1, 3)) < 1e-9:
            continue
        angs = [math.atan2(p[1] - robot[1], p[0] - robot[0]) for p in pts]
        if min(abs(math.remainder(angs[i] - angs[j], math.pi))
               for i in range(3) for j in range(i + 1, 3)) < 1e-8:
            continue
        return robot, pts


def test_criterion_04_measurement_soundness_100k(labeling):
    n_total = 100_000
    rng = np.random.default_rng(400)
    t0 = time.time()
    failures = 0
    for i in range(n_total):
        robot, pts = _random_observation(rng)
        obs = observe(robot, pts[0], pts[1], pts[2])
        truth = region_of_points(pts[0], pts[1], pts[2], labeling)
        m = measure_triple(obs, labeling)
        if truth not in m.states:
            failures += 1
    elapsed = time.time() - t0
    assert failures == 0, f"{failures} soundness failures"
    assert elapsed < 1800.0, f"took {elapsed / 60:.1f} min"


def test_criterion_05_bound_validity_10k():
    rng = np.random.default_rng(500)
    for form in range(5):
        for _ in range(2000):
            n = int(rng.integers(2, 5))
            con = random_constraint(rng, n, form=form)
            rect = random_rect(rng, n, span=4.0)
            lb = lower_bound(con, rect)
            # validity against a sampled minimum
            pts = rng.uniform(rect.lower, rect.upper, (200, n))
            vals = (np.einsum("ki,ij,kj->k", pts, con.A, pts)
                    + pts @ con.b + con.c)
            assert lb <= vals.min() + 1e-9
            if form < 4:  # linear/bilinear/diagonal/single-cross: exact
                oracle = exact_min_1d_scan(con, rect)
                assert lb <= oracle + 1e-9
                assert lb >= oracle - 1e-6


def test_criterion_06_desk_simulation_soundness_monotone(tables):
    table, labeling = tables
    world = gen_world(15, 30, seed=600)
    rows, qmap = run_sim(world, 15, table, labeling)
    # stored sets only shrink, so truth in the final map implies truth was
    # never pruned at any step
    for (a, b, c) in qmap.edges:
        for ordered in ((a, b, c), (b, c, a), (c, a, b)):
            x, y, z = ordered
            truth = region_of_points(world.landmarks[x], world.landmarks[y],
                                     world.landmarks[z], labeling)
            assert truth in qmap.get_relation(ordered)
    for r1, r2 in zip(rows, rows[1:]):
        assert r2.removed_pct >= r1.removed_pct - 1e-12
    assert rows[0].removed_pct >= 50.0, f"first step {rows[0].removed_pct:.1f}%"


def test_criterion_07_fusion_order_independence(tables):
    table, labeling = tables
    rng = np.random.default_rng(700)
    landmarks = {i + 1: rng.uniform(0, 60, 2) for i in range(6)}
    measurements = []
    while len(measurements) < 200:
        robot = rng.uniform(0, 60, 2)
        try:
            obses = observe_world(robot, landmarks, 6)
        except Exception:
            continue
        for obs in obses:
            measurements.append(measure_triple(obs, labeling))
    measurements = measurements[:200]
    dumps = set()
    for perm_seed in range(5):
        order = np.random.default_rng(perm_seed).permutation(200)
        qmap = QualMap()
        for idx in order:
            fuse(qmap, measurements[idx], table)
        dumps.add(dump_map(qmap))
    assert len(dumps) == 1


def test_criterion_08_rng_matches_geometry_20_worlds(tables):
    table, labeling = tables
    for seed in range(20):
        rng = np.random.default_rng(800 + seed)
        landmarks = {i + 1: rng.uniform(0, 100, 2) for i in range(12)}
        qmap = build_truth_map(landmarks, table, labeling)
        est = estimate_rng(qmap)
        zero = {e for e, w in est.weights.items() if w == 0.0}
        assert zero == geometric_rng(landmarks), f"world seed {800 + seed}"


def test_criterion_09_monte_carlo_trends(tables):
    table, labeling = tables
    t0 = time.time()
    campaign = CampaignConfig(runs=10, landmark_count=15, image_count=30,
                              n_nearest=(5, 8, 15), seed=900)
    raw, agg = run_mc(campaign, table, labeling)
    elapsed = time.time() - t0
    # parse the aggregated per-step means
    lines = agg.strip().splitlines()
    cols = lines[0].split(",")
    data = {}
    for line in lines[1:]:
        cells = line.split(",")
        step, n = int(cells[0]), int(cells[1])
        data[(step, n)] = {c: float(v) for c, v in zip(cols[2:], cells[2:])}
    steps = sorted({s for s, _ in data})
    final = steps[-1]
    removed = {n: data[(final, n)]["removed_pct_mean"] for n in (5, 8, 15)}
    assert removed[15] >= removed[8] >= removed[5], removed
    assert removed[15] - removed[5] >= 5.0, removed  # n=5 visibly behind
    assert data[(final, 15)]["nonadj_pct_mean"] < 45.0
    # RNG cost: an early peak followed by a convergent tail, for every n
    for n in (5, 8, 15):
        curve = [data[(s, n)]["rng_cost_mean"] for s in steps]
        peak = int(np.argmax(curve))
        assert peak < len(curve) // 2, (n, peak)
        assert curve[-1] < curve[peak], (n, curve)
    # partial visibility accumulates nodes, so its cost curve actually rises
    curve5 = [data[(s, 5)]["rng_cost_mean"] for s in steps]
    assert int(np.argmax(curve5)) > 0, curve5
    assert elapsed < 1200.0, f"took {elapsed / 60:.1f} min"


def test_criterion_10_navigation_arrival_50_pairs(tables):
    table, labeling = tables
    arrivals = 0
    pairs = 0
    for seed in range(5):
        rng = np.random.default_rng(1000 + seed)
        landmarks = {i + 1: rng.uniform(0, 100, 2) for i in range(12)}
        qmap = build_truth_map(landmarks, table, labeling)
        est = estimate_rng(qmap)
        for _ in range(10):
            start = rng.uniform(0, 100, 2)
            goal = rng.uniform(0, 100, 2)
            pairs += 1
            traj = navigate(landmarks, est, start, goal, step_size=0.5)
            end = np.array([traj[-1].x, traj[-1].y])
            nearest_end = min(landmarks, key=lambda lm: float(
                np.hypot(*(np.asarray(landmarks[lm]) - end))))
            nearest_goal = min(landmarks, key=lambda lm: float(
                np.hypot(*(np.asarray(landmarks[lm]) - goal))))
            if nearest_end == nearest_goal:
                arrivals += 1
    assert pairs == 50
    assert arrivals == 50, f"{arrivals}/50 arrivals"
