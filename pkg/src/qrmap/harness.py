"""World generation, simulation runs, and Monte Carlo campaigns.

A world is a set of uniformly placed landmarks plus a sequence of imaging
positions in a square. Simulation replays the imaging positions: at each one
the visible landmark triples are observed, measured, and fused into a
qualitative map, and the convergence metrics are recorded. Campaigns repeat
runs over independently seeded worlds and aggregate the metric curves per
visibility setting.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .edc import (
    RegionLabeling,
    canonical_coords,
    predicate_values,
    region_adjacency,
    region_of_points,
)
from .errors import Contradiction, DegenerateObservation, TooFewLandmarks
from .measurement import measure_triple, observe_world
from .nav import estimate_rng
from .operators import CompositionTable
from .qfeas import SolverConfig
from .qmap import QualMap, dump_map, fuse

#: Landmark separation floor and degeneracy margin, as fractions of the side.
EPS_SEP = 1e-3
EPS_DEGENERATE = 1e-3


@dataclass
class World:
    """Landmarks and imaging positions in a square of the given side."""

    landmarks: Dict[int, np.ndarray]
    imaging_positions: List[np.ndarray]
    bounds: float


@dataclass
class MetricsRow:
    """Convergence metrics after one imaging position."""

    step: int
    removed_pct: float
    constrained_pct: float
    nonadj_pct: float
    rng_cost: float
    update_ms: float


@dataclass
class CampaignConfig:
    """A Monte Carlo campaign: runs x visibility settings."""

    runs: int = 10
    landmark_count: int = 15
    image_count: int = 30
    n_nearest: Sequence[int] = (15,)
    seed: int = 0
    bounds: float = 100.0
    cyclic: bool = False
    max_range: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        if min(self.runs, self.landmark_count, self.image_count) < 1:
            raise ValueError("campaign counts must be >= 1")


def _triple_margin(a, b, c) -> float:
    """Smallest |predicate| of AB:C in canonical units (0 when undefined)."""
    vx, vy = b[0] - a[0], b[1] - a[1]
    d2 = vx * vx + vy * vy
    if d2 == 0.0:
        return 0.0
    p = canonical_coords(a, b, c)
    return min(abs(v) for v in predicate_values(p.alpha, p.beta))


def _landmarks_ok(pts: np.ndarray, side: float) -> bool:
    n = len(pts)
    for i in range(n):
        for j in range(i + 1, n):
            if np.hypot(*(pts[i] - pts[j])) < EPS_SEP * side:
                return False
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            for k in range(n):
                if k == i or k == j:
                    continue
                if _triple_margin(pts[i], pts[j], pts[k]) < EPS_DEGENERATE:
                    return False
    return True


def _image_ok(pos: np.ndarray, pts: np.ndarray, side: float) -> bool:
    """Reject imaging points that see any landmark pair nearly collinear
    with the camera or at nearly equal range."""
    delta = pts - pos
    d = np.hypot(delta[:, 0], delta[:, 1])
    if np.min(d) < EPS_SEP * side:
        return False
    order = np.sort(d)
    if np.min(np.diff(order)) < EPS_DEGENERATE:
        return False
    ang = np.arctan2(delta[:, 1], delta[:, 0])
    n = len(pts)
    for i in range(n):
        for j in range(i + 1, n):
            gap = abs(math.remainder(ang[i] - ang[j], math.pi))
            if gap < EPS_DEGENERATE:
                return False
    return True


def gen_world(
    landmark_count: int,
    image_count: int,
    seed: int,
    bounds: float = 100.0,
) -> World:
    """Uniform random world; degenerate configurations are resampled."""
    rng = np.random.default_rng(seed)
    while True:
        pts = rng.uniform(0.0, bounds, (landmark_count, 2))
        if _landmarks_ok(pts, bounds):
            break
    images = []
    while len(images) < image_count:
        pos = rng.uniform(0.0, bounds, 2)
        if _image_ok(pos, pts, bounds):
            images.append(pos)
    return World(
        landmarks={i + 1: pts[i] for i in range(landmark_count)},
        imaging_positions=images,
        bounds=bounds,
    )


def save_world(world: World) -> str:
    lines = ["B %.9f" % world.bounds]
    for lm in sorted(world.landmarks):
        p = world.landmarks[lm]
        lines.append("L %d %.9f %.9f" % (lm, p[0], p[1]))
    for p in world.imaging_positions:
        lines.append("W %.9f %.9f" % (p[0], p[1]))
    return "\n".join(lines) + "\n"


def load_world(text: str) -> World:
    landmarks: Dict[int, np.ndarray] = {}
    images: List[np.ndarray] = []
    bounds = 0.0
    for line in text.strip().splitlines():
        parts = line.split()
        if parts[0] == "B":
            bounds = float(parts[1])
        elif parts[0] == "L":
            landmarks[int(parts[1])] = np.array(
                [float(parts[2]), float(parts[3])]
            )
        elif parts[0] == "W":
            images.append(np.array([float(parts[1]), float(parts[2])]))
        else:
            raise ValueError(f"bad world line: {line!r}")
    return World(landmarks, images, bounds)


def _truth(world: World, labeling: RegionLabeling) -> Dict[Tuple[int, int, int], int]:
    truth = {}
    ids = sorted(world.landmarks)
    for a in ids:
        for b in ids:
            if b == a:
                continue
            for c in ids:
                if c == a or c == b:
                    continue
                truth[(a, b, c)] = region_of_points(
                    world.landmarks[a],
                    world.landmarks[b],
                    world.landmarks[c],
                    labeling,
                )
    return truth


def _metrics(
    qmap: QualMap,
    truth: Dict[Tuple[int, int, int], int],
    adjacency: Dict[int, frozenset],
    final_edges: int,
    step: int,
    update_ms: float,
) -> MetricsRow:
    removed = 0
    constrained = 0
    open_total = 0
    nonadj = 0
    for (a, b, c), slots in qmap.edges.items():
        if all(s.is_singleton() for s in slots):
            constrained += 1
        for ordered in ((a, b, c), (b, c, a), (c, a, b)):
            states = qmap.get_relation(ordered)
            removed += 20 - len(states)
            t = truth[ordered]
            open_total += len(states)
            for s in states:
                if s != t and s not in adjacency[t]:
                    nonadj += 1
    denom = max(final_edges, 1)
    rng_cost = (
        estimate_rng(qmap).total_cost() if len(qmap.nodes) >= 2 else 0.0
    )
    return MetricsRow(
        step=step,
        removed_pct=100.0 * removed / (denom * 3 * 19),
        constrained_pct=100.0 * constrained / denom,
        nonadj_pct=100.0 * nonadj / max(open_total, 1),
        rng_cost=rng_cost,
        update_ms=update_ms,
    )


def run_sim(
    world: World,
    n_nearest: int,
    table: CompositionTable,
    labeling: RegionLabeling,
    cfg: SolverConfig = SolverConfig(),
    cyclic: bool = False,
    max_range: Optional[float] = None,
) -> Tuple[List[MetricsRow], QualMap]:
    """Replay the world's imaging positions into a qualitative map.

    Measurements restrict their candidate regions to the states currently
    open in the map; this changes nothing about the resulting intersection
    but skips feasibility tests for states already pruned. A Contradiction
    aborts the run with a diagnostic dump of the offending measurement and
    the current map.
    """
    truth = _truth(world, labeling)
    adjacency = region_adjacency(labeling)
    # The final node set is known up front: every landmark that any imaging
    # position can see. Metrics are normalized against it so curves remain
    # comparable across steps.
    qmap = QualMap()
    seen = set()
    plans = []
    for pos in world.imaging_positions:
        try:
            obses = observe_world(
                pos, world.landmarks, n_nearest, cyclic=cyclic,
                max_range=max_range,
            )
        except (DegenerateObservation, TooFewLandmarks):
            obses = []
        plans.append(obses)
        for obs in obses:
            seen.update(obs.ids)
    n_final = len(seen)
    final_edges = n_final * (n_final - 1) * (n_final - 2) // 6
    rows = []
    for step, obses in enumerate(plans, start=1):
        t0 = time.perf_counter()
        for obs in obses:
            candidates = None
            if qmap.has_edge(obs.ids):
                candidates = qmap.get_relation(tuple(obs.ids))
            try:
                m = measure_triple(obs, labeling, cfg, candidates=candidates)
            except DegenerateObservation:
                continue
            try:
                fuse(qmap, m, table)
            except Contradiction:
                print("contradiction at step %d on %s" % (step, m))
                print(dump_map(qmap))
                raise
        ms = 1000.0 * (time.perf_counter() - t0)
        rows.append(_metrics(qmap, truth, adjacency, final_edges, step, ms))
    return rows, qmap


CSV_HEADER = "step,n,run,removed_pct,constrained_pct,nonadj_pct,rng_cost,update_ms"


def rows_to_csv(rows: List[MetricsRow], n: int, run: int) -> List[str]:
    return [
        "%d,%d,%d,%.4f,%.4f,%.4f,%.6f,%.3f"
        % (r.step, n, run, r.removed_pct, r.constrained_pct, r.nonadj_pct,
           r.rng_cost, r.update_ms)
        for r in rows
    ]


def _mc_run(
    campaign: CampaignConfig,
    table: CompositionTable,
    labeling: RegionLabeling,
    cfg: SolverConfig,
    run: int,
) -> List[Tuple[int, List[MetricsRow]]]:
    """One independently seeded campaign run, over all visibility settings."""
    world = gen_world(
        campaign.landmark_count,
        campaign.image_count,
        seed=campaign.seed + 7919 * run,
        bounds=campaign.bounds,
    )
    out = []
    for n in campaign.n_nearest:
        rows, _ = run_sim(
            world, n, table, labeling, cfg,
            cyclic=campaign.cyclic, max_range=campaign.max_range,
        )
        out.append((n, rows))
    return out


def run_mc(
    campaign: CampaignConfig,
    table: CompositionTable,
    labeling: RegionLabeling,
    cfg: SolverConfig = SolverConfig(),
    progress=None,
) -> Tuple[str, str]:
    """Monte Carlo campaign. Returns (per-run CSV, aggregated CSV).

    Runs have independent seeds and can execute in parallel processes
    (campaign.workers > 1); results are assembled in run order either way,
    so the CSVs are byte-identical for a given seed.
    """
    if campaign.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=campaign.workers) as pool:
            results = list(
                pool.map(
                    _mc_run,
                    [campaign] * campaign.runs,
                    [table] * campaign.runs,
                    [labeling] * campaign.runs,
                    [cfg] * campaign.runs,
                    range(campaign.runs),
                )
            )
    else:
        results = [
            _mc_run(campaign, table, labeling, cfg, run)
            for run in range(campaign.runs)
        ]
    lines = [CSV_HEADER]
    curves: Dict[Tuple[int, int], List[List[float]]] = {}
    for run, per_n in enumerate(results):
        for n, rows in per_n:
            lines.extend(rows_to_csv(rows, n, run))
            for r in rows:
                curves.setdefault((r.step, n), []).append([
                    r.removed_pct, r.constrained_pct, r.nonadj_pct,
                    r.rng_cost, r.update_ms,
                ])
            if progress is not None:
                progress(run, n)
    agg = [
        "step,n,removed_pct_mean,removed_pct_std,constrained_pct_mean,"
        "constrained_pct_std,nonadj_pct_mean,nonadj_pct_std,rng_cost_mean,"
        "rng_cost_std,update_ms_mean,update_ms_std"
    ]
    for (step, n) in sorted(curves):
        data = np.asarray(curves[(step, n)])
        mean = data.mean(axis=0)
        std = data.std(axis=0)
        cells = ["%d" % step, "%d" % n]
        for m, s in zip(mean, std):
            cells.append("%.4f" % m)
            cells.append("%.4f" % s)
        agg.append(",".join(cells))
    return "\n".join(lines) + "\n", "\n".join(agg) + "\n"
