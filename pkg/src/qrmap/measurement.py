"""Camera-derived qualitative measurements of landmark triples.

A single image provides, for each visible landmark triple (A, B, C), the
bearings to B and C relative to the direction of A and the relative order of
the three ranges -- but not the ranges themselves. Fixing A at (1, 0) in a
camera-centred frame leaves the two ranges l (to C) and r (to B) as unknowns;
each of the 20 qualitative regions of AB:C then corresponds to a system of
strict quadratic inequalities in (l, r), and a region is consistent with the
observation exactly when that system plus the observed ordering constraints
is feasible. The measurement is the set of all consistent regions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .edc import RegionLabeling, SignVector
from .errors import BudgetExceeded, DegenerateObservation, TooFewLandmarks
from . import _kernel
from .qfeas import (
    QuadConstraint,
    Rect,
    SolverConfig,
    _pack_plans,
    solve_lp_guided,
)
from .states import StateSet

#: Bearings closer than this (radians) to a collinear configuration are
#: rejected as degenerate.
EPS_BEARING = 1e-9

#: Relative range differences below this are treated as ordering ties.
EPS_ORDER = 1e-12

#: Search box for the unknown ranges (l, r), in units of the range to A.
RANGE_BOUND = 1000.0


@dataclass(frozen=True)
class TripleObservation:
    """Bearings and range ordering for one directed landmark triple.

    ids is the triple (A, B, C) naming the relation AB:C being measured.
    theta and phi are the bearings to B and C relative to the direction of A,
    both in (-pi, pi]. ordering lists the three ids from closest to farthest.
    """

    ids: Tuple[int, int, int]
    theta: float
    phi: float
    ordering: Tuple[int, int, int]

    def __post_init__(self):
        if len(set(self.ids)) != 3:
            raise ValueError("triple must name three distinct landmarks")
        if sorted(self.ordering) != sorted(self.ids):
            raise ValueError("ordering must be a permutation of ids")
        for ang in (self.theta, self.phi):
            if not -math.pi < ang <= math.pi:
                raise ValueError(f"bearing out of (-pi, pi]: {ang!r}")


@dataclass(frozen=True)
class TripleMeasurement:
    """The set of regions for AB:C consistent with one observation."""

    ids: Tuple[int, int, int]
    states: StateSet

    def __post_init__(self):
        if self.states.is_empty():
            raise ValueError("a measurement cannot be empty")


def _wrap(angle: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(angle + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def _collinearity_margin(theta: float, phi: float) -> float:
    """Angular distance of the observation from the nearest configuration
    with two landmarks (or a landmark pair and the camera) collinear."""
    gaps = []
    for ang in (theta, phi, _wrap(theta - phi)):
        gaps.append(abs(_wrap(ang)))
        gaps.append(abs(_wrap(ang - math.pi)))
    return min(gaps)


def _expression_table(theta: float, phi: float):
    """Coefficient arrays of the six boundary expressions in x = (l, r).

    Expression k changes sign exactly where canonical predicate k does; the
    first four share its sign and the last two are negated (they compare the
    same distances in the opposite order).
    """
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    k = sp * st + cp * ct
    cross = sp * ct - cp * st

    def mat(a_ll, a_rr, a_lr):
        return np.array([[a_ll, 0.5 * a_lr], [0.5 * a_lr, a_rr]])

    return [
        # (sin(phi-theta)) l r - sin(phi) l + sin(theta) r : side of AB
        (mat(0.0, 0.0, cross), np.array([-sp, st]), 0.0),
        # -cos(phi-theta) l r + cos(phi) l + cos(theta) r - 1 : front of A
        (mat(0.0, 0.0, -k), np.array([cp, ct]), -1.0),
        # r^2 - cos(phi-theta) l r + cos(phi) l - cos(theta) r : front of B
        (mat(0.0, 1.0, -k), np.array([cp, -ct]), 0.0),
        # r^2 - 2 cos(phi-theta) l r + 2 cos(phi) l - 1 : |BC| vs |AC|
        (mat(0.0, 1.0, -2.0 * k), np.array([2.0 * cp, 0.0]), -1.0),
        # l^2 - r^2 - 2 cos(phi) l + 2 cos(theta) r : |AC| vs |AB|
        (mat(1.0, -1.0, 0.0), np.array([-2.0 * cp, 2.0 * ct]), 0.0),
        # l^2 - 2 cos(phi-theta) l r + 2 cos(theta) r - 1 : |BC| vs |AB|
        (mat(1.0, 0.0, -2.0 * k), np.array([0.0, 2.0 * ct]), -1.0),
    ]


#: Per-expression sign relative to the canonical predicates.
_SIGN_FLIP = (1, 1, 1, 1, -1, -1)


def _region_constraints(exprs, signs: SignVector) -> List[QuadConstraint]:
    cons = []
    for (A, b, c), s, flip in zip(exprs, signs, _SIGN_FLIP):
        if s * flip < 0:
            cons.append(QuadConstraint(A, b, c))
        else:
            cons.append(QuadConstraint(-A, -b, -c))
    return cons


def _ordering_constraints(obs: TripleObservation) -> List[QuadConstraint]:
    """Linear inequalities encoding the observed range order.

    With dist(A) = 1, dist(B) = r and dist(C) = l, each of the three pairwise
    comparisons contributes one strict inequality.
    """
    a, b, c = obs.ids
    rank = {lm: i for i, lm in enumerate(obs.ordering)}
    zero = np.zeros((2, 2))
    cons = []
    # A vs C: 1 - l < 0 when A is closer, else l - 1 < 0.
    if rank[a] < rank[c]:
        cons.append(QuadConstraint(zero, np.array([-1.0, 0.0]), 1.0))
    else:
        cons.append(QuadConstraint(zero, np.array([1.0, 0.0]), -1.0))
    # A vs B: same with r.
    if rank[a] < rank[b]:
        cons.append(QuadConstraint(zero, np.array([0.0, -1.0]), 1.0))
    else:
        cons.append(QuadConstraint(zero, np.array([0.0, 1.0]), -1.0))
    # B vs C: r - l < 0 when B is closer, else l - r < 0.
    if rank[b] < rank[c]:
        cons.append(QuadConstraint(zero, np.array([-1.0, 1.0]), 0.0))
    else:
        cons.append(QuadConstraint(zero, np.array([1.0, -1.0]), 0.0))
    return cons


#: Rectangle budget for the plain kernel pass before escalating to the
#: LP-certificate search; the vast majority of region tests finish well
#: under this.
_KERNEL_CAP = 4000

#: Node budget for the LP-certificate search; it certifies joint conflicts
#: within a handful of nodes, so anything still open afterwards is retained.
_LP_CAP = 2000


def _presample_regions(
    obs: TripleObservation, labeling: RegionLabeling, n: int = 8192, seed: int = 0
) -> set:
    """Regions witnessed by direct sampling of range pairs.

    Samples mix log-uniform coverage of the whole box with dense coverage of
    the unit-scale band where most feasible sets live, keeps only samples
    matching the observed ordering, and classifies each surviving range pair
    by its expression signs. Every region hit this way has an explicit strict
    witness, so the feasibility solver can be skipped for it.
    """
    st, ct = math.sin(obs.theta), math.cos(obs.theta)
    sp, cp = math.sin(obs.phi), math.cos(obs.phi)
    k = sp * st + cp * ct
    cross = sp * ct - cp * st
    g = np.random.default_rng(seed)
    l = np.concatenate([
        np.exp(g.uniform(np.log(1e-3), np.log(RANGE_BOUND), n)),
        g.uniform(0.0, 3.0, n),
    ])
    r = np.concatenate([
        np.exp(g.uniform(np.log(1e-3), np.log(RANGE_BOUND), n)),
        g.uniform(0.0, 3.0, n),
    ])
    a_, b_, c_ = obs.ids
    rank = {lm: i for i, lm in enumerate(obs.ordering)}
    ok = (l > 1.0) if rank[a_] < rank[c_] else (l < 1.0)
    ok &= (r > 1.0) if rank[a_] < rank[b_] else (r < 1.0)
    ok &= (r < l) if rank[b_] < rank[c_] else (l < r)
    l, r = l[ok], r[ok]
    exprs = np.stack([
        cross * l * r - sp * l + st * r,
        -k * l * r + cp * l + ct * r - 1.0,
        r * r - k * l * r + cp * l - ct * r,
        r * r - 2.0 * k * l * r + 2.0 * cp * l - 1.0,
        -(l * l - r * r - 2.0 * cp * l + 2.0 * ct * r),
        -(l * l - 2.0 * k * l * r + 2.0 * ct * r - 1.0),
    ])
    strict = np.min(np.abs(exprs), axis=0) > 1e-9
    codes = ((exprs > 0.0) << np.arange(6)[:, None]).sum(axis=0)
    code_of = {}
    for reg, signs in labeling.by_region.items():
        code = 0
        for i, s in enumerate(signs):
            if s > 0:
                code |= 1 << i
        code_of[code] = reg
    hits = set()
    for code in np.unique(codes[strict]):
        reg = code_of.get(int(code))
        if reg is not None:
            hits.add(reg)
    return hits


def measure_triple(
    obs: TripleObservation,
    labeling: RegionLabeling,
    cfg: SolverConfig = SolverConfig(),
    candidates: Optional[StateSet] = None,
) -> TripleMeasurement:
    """All regions of AB:C consistent with the observed bearings and order.

    Each candidate region (all 20 by default; restrict via `candidates` when
    prior knowledge already excludes some) is kept iff its inequality system
    plus the ordering constraints has a feasible range pair (l, r). Regions
    with a sampled witness are accepted outright; the rest go to the kernel
    search, escalating to the LP-certificate search when the kernel's verdict
    is not a certificate: its budget ran out (near-collinear bearings produce
    joint conflicts that per-constraint bounds cannot prune) or it abandoned
    rectangles at the depth cutoff (near-circumcenter configurations leave
    feasible slivers below its resolution). A region whose tests exceed every
    budget, or that stays unresolved throughout, is retained, which keeps the
    measurement a sound over-approximation.
    """
    if _collinearity_margin(obs.theta, obs.phi) < EPS_BEARING:
        raise DegenerateObservation(
            f"bearings {obs.theta}, {obs.phi} are collinear within {EPS_BEARING}"
        )
    exprs = _expression_table(obs.theta, obs.phi)
    ordering = _ordering_constraints(obs)
    box = Rect(np.zeros(2), np.full(2, RANGE_BOUND))
    pool = list(candidates) if candidates is not None else range(1, 21)
    witnessed = _presample_regions(obs, labeling, seed=cfg.rng_seed)
    # The 20 region systems share one coefficient stack up to per-expression
    # sign flips, and sign flips preserve sparsity, so the kernel's bounding
    # plans are packed once per observation.
    base_A = np.stack([e[0] for e in exprs] + [c.A for c in ordering])
    base_b = np.stack([e[1] for e in exprs] + [c.b for c in ordering])
    base_c = np.asarray([e[2] for e in exprs] + [c.c for c in ordering])
    packed = _pack_plans(base_A, base_b)
    flips = np.asarray(_SIGN_FLIP + (1, 1, 1), dtype=float)
    kept = []
    for region in pool:
        if region in witnessed:
            kept.append(region)
            continue
        sign = -flips * np.asarray(labeling.by_region[region] + (-1, -1, -1))
        A = sign[:, None, None] * base_A
        b = sign[:, None] * base_b
        c = sign * base_c
        status, _, _, abandoned = _kernel.solve_kernel(
            A, b, c, A.shape[0], *packed,
            box.lower, box.upper, cfg.max_depth, cfg.eps_volume,
            cfg.rng_seed & 0x7FFFFFFF, min(cfg.hard_cap, _KERNEL_CAP), 0,
        )
        if status == 2 or (status == 0 and abandoned > 0):
            # Budget ran out, or the kernel gave up on some rectangles at
            # the depth cutoff (near-circumcenter observations leave feasible
            # slivers thinner than the kernel's resolution). The LP search
            # prunes the bulk jointly and zooms into whatever remains; only
            # its fully resolved verdicts may reject a region.
            cons = (
                _region_constraints(exprs, labeling.by_region[region])
                + ordering
            )
            try:
                slow = replace(cfg, hard_cap=min(cfg.hard_cap, _LP_CAP),
                               shrink_root=True)
                res = solve_lp_guided(cons, box, slow)
                feasible = res.feasible or not res.resolved
            except BudgetExceeded:
                feasible = True
        else:
            feasible = status == 1
        if feasible:
            kept.append(region)
    if not kept:
        raise DegenerateObservation(
            "no region is consistent with the observation"
        )
    return TripleMeasurement(obs.ids, StateSet(kept))


def _bearing(origin, target, ref_angle: float) -> float:
    return _wrap(
        math.atan2(target[1] - origin[1], target[0] - origin[0]) - ref_angle
    )


def _observe_one(
    robot, ids: Tuple[int, int, int], pos: Dict[int, Sequence[float]]
) -> TripleObservation:
    a, b, c = ids
    ref = math.atan2(pos[a][1] - robot[1], pos[a][0] - robot[0])
    dist = {
        lm: math.hypot(pos[lm][0] - robot[0], pos[lm][1] - robot[1])
        for lm in ids
    }
    ordering = tuple(sorted(ids, key=lambda lm: dist[lm]))
    return TripleObservation(
        ids=ids,
        theta=_bearing(robot, pos[b], ref),
        phi=_bearing(robot, pos[c], ref),
        ordering=ordering,
    )


def observe_world(
    robot,
    landmarks: Dict[int, Sequence[float]],
    n_nearest: int,
    cyclic: bool = False,
    max_range: Optional[float] = None,
) -> List[TripleObservation]:
    """Observations of every landmark triple visible from one imaging point.

    The n_nearest landmarks by true distance (optionally also capped by
    max_range) are selected; for each unordered triple, either all three
    cyclic relations are observed directly, or -- with cyclic=True -- only
    one, leaving the rest to cyclic pseudo-measurements during fusion. Range
    ties (relative to the nearer range) are rejected as degenerate since the
    ordering would be arbitrary.
    """
    dists = sorted(
        (math.hypot(p[0] - robot[0], p[1] - robot[1]), lm)
        for lm, p in landmarks.items()
    )
    if max_range is not None:
        dists = [(d, lm) for d, lm in dists if d <= max_range]
    visible = dists[: max(n_nearest, 0)]
    if len(visible) < 3:
        raise TooFewLandmarks(f"{len(visible)} landmarks visible, need 3")
    for (d1, lm1), (d2, lm2) in zip(visible, visible[1:]):
        if d2 - d1 <= EPS_ORDER * max(d2, 1.0):
            raise DegenerateObservation(
                f"range tie between landmarks {lm1} and {lm2}"
            )
    ids = sorted(lm for _, lm in visible)
    out = []
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            for k in range(j + 1, len(ids)):
                a, b, c = ids[i], ids[j], ids[k]
                out.append(_observe_one(robot, (a, b, c), landmarks))
                if not cyclic:
                    out.append(_observe_one(robot, (b, c, a), landmarks))
                    out.append(_observe_one(robot, (c, a, b), landmarks))
    return out
