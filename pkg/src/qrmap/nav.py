"""Relative Neighborhood Graph estimation and landmark-hopping navigation.

Two landmarks are RNG neighbours when no third landmark lies in the lune
between them, and the lune is exactly the union of qualitative regions
{7, 8, 13, 14}. A qualitative map therefore yields an RNG estimate directly:
a third landmark whose only open states are lune states disproves the edge,
and otherwise the fraction of its open states inside the lune contributes to
the edge's cost. Zero-cost edges are certain RNG edges; costly edges may
still be pruned by future measurements.

Navigation hops between the Voronoi cells of the landmarks along a planned
RNG route. Cell membership needs only the relative range ordering of
landmarks, so the simulated robot uses the same minimal sensing as the
measurement model.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import NoPath, StuckDetected
from .qmap import QualMap
from .states import LUNE_REGIONS

#: Default weighting of RNG edge cost against the fixed per-hop cost.
DEFAULT_LAMBDA = 1.0


@dataclass
class RngEstimate:
    """Weighted RNG estimate R = (P, D, W) extracted from a map."""

    nodes: List[int]
    weights: Dict[Tuple[int, int], float]

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.weights

    def weight(self, i: int, j: int) -> float:
        return self.weights[(min(i, j), max(i, j))]

    def total_cost(self) -> float:
        return sum(self.weights.values())

    def neighbors(self, i: int) -> List[int]:
        out = []
        for a, b in self.weights:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return out


@dataclass
class RoutePlan:
    """A sequence of landmark hops with the cost paid for each hop."""

    hops: List[int]
    costs: List[float]

    @property
    def total_cost(self) -> float:
        return sum(self.costs)


def estimate_rng(qmap: QualMap) -> RngEstimate:
    """Weighted RNG estimate of the landmarks in a qualitative map.

    For every candidate edge (i, j), each third landmark k votes with the
    fraction of open states of ij:k that lie in the lune; a landmark whose
    open states are all lune states removes the edge outright. Edge costs
    are normalized by the node count.
    """
    nodes = sorted(qmap.nodes)
    n = len(nodes)
    if n < 2:
        raise ValueError("RNG estimation needs at least two landmarks")
    weights: Dict[Tuple[int, int], float] = {}
    for ii in range(n):
        for jj in range(ii + 1, n):
            i, j = nodes[ii], nodes[jj]
            w = 0.0
            alive = True
            for k in nodes:
                if k == i or k == j:
                    continue
                states = qmap.get_relation((i, j, k))
                openstates = len(states)
                conflicts = sum(1 for s in states if s in LUNE_REGIONS)
                if conflicts == openstates:
                    alive = False
                    break
                w += conflicts / openstates
            if alive:
                weights[(i, j)] = w / n
    return RngEstimate(nodes=nodes, weights=weights)


def plan_route(
    rng: RngEstimate, p_s: int, p_e: int, lam: float = DEFAULT_LAMBDA
) -> RoutePlan:
    """Minimum-cost landmark sequence from p_s to p_e over RNG edges.

    Hop cost is 1 + lam * w_ij, so lam = 0 recovers the pure hop-count
    shortest path and positive lam biases the search towards edges least
    likely to be pruned by future measurements.
    """
    if p_s not in rng.nodes or p_e not in rng.nodes:
        raise NoPath(f"endpoints {p_s}, {p_e} not in the RNG")
    if p_s == p_e:
        return RoutePlan([p_s], [])
    adj: Dict[int, List[Tuple[int, float]]] = {v: [] for v in rng.nodes}
    for (a, b), w in rng.weights.items():
        cost = 1.0 + lam * w
        adj[a].append((b, cost))
        adj[b].append((a, cost))
    dist = {p_s: 0.0}
    prev: Dict[int, int] = {}
    heap = [(0.0, p_s)]
    while heap:
        d, u = heapq.heappop(heap)
        if u == p_e:
            break
        if d > dist.get(u, math.inf):
            continue
        for v, c in adj[u]:
            nd = d + c
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    if p_e not in prev:
        raise NoPath(f"no RNG route from {p_s} to {p_e}")
    hops = [p_e]
    while hops[-1] != p_s:
        hops.append(prev[hops[-1]])
    hops.reverse()
    costs = []
    for a, b in zip(hops, hops[1:]):
        costs.append(1.0 + lam * rng.weight(a, b))
    return RoutePlan(hops, costs)


@dataclass
class TrajectoryPoint:
    step: int
    x: float
    y: float
    target: int


def _nearest(pos, landmarks: Dict[int, Sequence[float]]) -> int:
    """The robot's Voronoi cell, detected purely by range ordering."""
    return min(
        landmarks,
        key=lambda lm: math.hypot(
            landmarks[lm][0] - pos[0], landmarks[lm][1] - pos[1]
        ),
    )


def navigate(
    landmarks: Dict[int, Sequence[float]],
    rng: RngEstimate,
    start,
    goal,
    step_size: float,
    lam: float = DEFAULT_LAMBDA,
    max_steps: int = 100_000,
) -> List[TrajectoryPoint]:
    """Drive from start to the goal landmark's Voronoi cell along RNG hops.

    The robot heads straight for the next landmark on the route until range
    orderings show it entered that landmark's Voronoi cell, then advances
    the plan. Raises StuckDetected when the step budget runs out before the
    goal cell is reached.
    """
    p_s = _nearest(start, landmarks)
    p_e = _nearest(goal, landmarks)
    plan = plan_route(rng, p_s, p_e, lam)
    pos = np.asarray(start, dtype=float)
    traj = [TrajectoryPoint(0, pos[0], pos[1], plan.hops[0])]
    hop_idx = 0
    # Already inside a cell along the route? Skip to the furthest such hop.
    here = _nearest(pos, landmarks)
    if here in plan.hops:
        hop_idx = plan.hops.index(here) + 1
    step = 0
    while hop_idx < len(plan.hops):
        target = plan.hops[hop_idx]
        tpos = np.asarray(landmarks[target], dtype=float)
        while _nearest(pos, landmarks) != target:
            step += 1
            if step > max_steps:
                raise StuckDetected(
                    f"failed to enter cell of {target} in {max_steps} steps"
                )
            delta = tpos - pos
            d = float(np.hypot(*delta))
            pos = tpos.copy() if d <= step_size else pos + delta * (step_size / d)
            traj.append(TrajectoryPoint(step, pos[0], pos[1], target))
        hop_idx += 1
    return traj


def dump_rng(rng: RngEstimate) -> str:
    """Edge list with weights, one edge per line."""
    lines = ["%d %d %.9f" % (a, b, w) for (a, b), w in sorted(rng.weights.items())]
    return "\n".join(lines) + "\n"


def trajectory_csv(traj: List[TrajectoryPoint]) -> str:
    lines = ["step,x,y,target"]
    for p in traj:
        lines.append("%d,%.6f,%.6f,%d" % (p.step, p.x, p.y, p.target))
    return "\n".join(lines) + "\n"
