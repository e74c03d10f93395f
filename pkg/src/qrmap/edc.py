"""Extended double-cross geometry in the canonical frame A=(0,0), B=(0,1).

The plane around a directed landmark pair is split by six dichotomies
(side of AB, front/behind A, front/behind B, and the three pairwise distance
comparisons) into 20 full-dimensional regions. This module evaluates the six
predicates, provides a ground-truth region oracle for arbitrary coordinates,
bootstraps the numbering of the regions from the unary-table anchors, and
computes the region adjacency relation numerically.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Dict, FrozenSet, Sequence, Tuple

import numpy as np

from ._table1 import UNARY_ROWS
from .errors import AmbiguousLabeling, DegenerateTriple, InconsistentAnchors

#: Predicates closer to zero than this (canonical units) are degenerate.
EPS_BOUNDARY = 1e-9

SignVector = Tuple[int, int, int, int, int, int]


@dataclass(frozen=True)
class CanonicalTriple:
    """Coordinates of the query point C in the frame A=(0,0), B=(0,1)."""

    alpha: float
    beta: float


def predicate_values(alpha, beta):
    """The six boundary expressions; each is negative on the named side.

    Order: side of AB, front of A, front of B, |AC|>|BC|, |AC|>|AB|,
    |BC|>|AB| (all for the expression < 0).
    """
    rr = alpha * alpha + beta * beta
    return (
        -alpha,
        -beta,
        1.0 - beta,
        1.0 - 2.0 * beta,
        1.0 - rr,
        2.0 * beta - rr,
    )


def eval_predicates(p: CanonicalTriple, eps: float = EPS_BOUNDARY) -> SignVector:
    """Signs of the six predicates at p; DegenerateTriple near any boundary."""
    vals = predicate_values(p.alpha, p.beta)
    for v in vals:
        if abs(v) < eps:
            raise DegenerateTriple(f"predicate within {eps} of a boundary at {p}")
    return tuple(1 if v > 0.0 else -1 for v in vals)


def canonical_coords(a, b, c) -> CanonicalTriple:
    """Map world points (a, b, c) to canonical coordinates of c.

    Uses the orientation-preserving similarity taking a to (0,0) and b to
    (0,1), so left/right of the directed pair is preserved.
    """
    vx = b[0] - a[0]
    vy = b[1] - a[1]
    d2 = vx * vx + vy * vy
    if d2 == 0.0:
        raise DegenerateTriple("coincident base landmarks")
    dx = c[0] - a[0]
    dy = c[1] - a[1]
    return CanonicalTriple((vy * dx - vx * dy) / d2, (vx * dx + vy * dy) / d2)


def _sign_code(signs: SignVector) -> int:
    code = 0
    for k, s in enumerate(signs):
        if s > 0:
            code |= 1 << k
    return code


def _code_signs(code: int) -> SignVector:
    return tuple(1 if code >> k & 1 else -1 for k in range(6))


class RegionLabeling:
    """Bijection between the 20 realizable sign classes and region ids."""

    def __init__(self, by_region: Dict[int, SignVector]):
        if sorted(by_region) != list(range(1, 21)):
            raise ValueError("labeling must cover region ids 1..20")
        self.by_region = dict(by_region)
        self._id_of_code = {_sign_code(s): r for r, s in by_region.items()}
        if len(self._id_of_code) != 20:
            raise ValueError("labeling sign classes are not distinct")

    def region_of_signs(self, signs: SignVector) -> int:
        code = _sign_code(signs)
        try:
            return self._id_of_code[code]
        except KeyError:
            raise DegenerateTriple(f"sign class {signs} is not realizable")

    def checksum(self) -> str:
        payload = "\n".join(
            "%d:%s" % (r, ",".join(str(s) for s in self.by_region[r]))
            for r in range(1, 21)
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def region_of(p: CanonicalTriple, labeling: RegionLabeling) -> int:
    return labeling.region_of_signs(eval_predicates(p))


def region_of_points(a, b, c, labeling: RegionLabeling) -> int:
    """Ground-truth oracle: the region of AB:C from world coordinates."""
    return region_of(canonical_coords(a, b, c), labeling)


def _classify_grid(alpha, beta, eps):
    """Sign codes for sample arrays; -1 marks near-boundary samples."""
    rr = alpha * alpha + beta * beta
    exprs = np.stack(
        [-alpha, -beta, 1.0 - beta, 1.0 - 2.0 * beta, 1.0 - rr, 2.0 * beta - rr]
    )
    codes = np.zeros(alpha.shape, dtype=np.int64)
    for k in range(6):
        codes |= (exprs[k] > 0.0).astype(np.int64) << k
    codes[np.min(np.abs(exprs), axis=0) < eps] = -1
    return codes


def _canonical_batch(px, py, qx, qy, rx, ry):
    vx = qx - px
    vy = qy - py
    d2 = vx * vx + vy * vy
    dx = rx - px
    dy = ry - py
    return (vy * dx - vx * dy) / d2, (vx * dx + vy * dy) / d2


_ANCHOR2 = {0: -1, 2: -1, 5: -1}  # side, front-of-B, |BC|>|AB| all negative
_ANCHOR7 = {0: 1, 3: -1, 4: 1}  # left, |BC|<|AC|, |AC|<|AB|

# Worked composition identities; the sampled ground-truth composition under a
# correct labeling must be a subset of each right-hand side.
_COMPOSE_ANCHORS = {
    (1, 5): frozenset({1, 5, 11, 12, 17, 19}),
    (5, 5): frozenset({12, 17, 18, 19, 20}),
    (11, 5): frozenset({17, 18, 19, 20}),
}


def _matches(code: int, wanted: Dict[int, int]) -> bool:
    return all((1 if code >> k & 1 else -1) == s for k, s in wanted.items())


def derive_region_labels(
    grid: int = 1000,
    domain: float = 5.0,
    samples_per_class: int = 600,
    rng_seed: int = 0,
) -> RegionLabeling:
    """Bootstrap the region numbering from dense sampling and the anchors.

    Dense-samples the canonical frame, collects the realizable sign classes
    (exactly 20), computes the geometric images of the three unary operators
    per class, and searches for the unique id assignment consistent with the
    unary table plus the worked-inequality anchors and the lune set.
    """
    h = 2.0 * domain / grid
    axis = np.linspace(-domain + 0.5 * h, domain - 0.5 * h, grid)
    alpha, beta = np.meshgrid(axis, axis)
    alpha = alpha.ravel()
    beta = beta.ravel()
    codes = _classify_grid(alpha, beta, 1e-7)
    valid = codes >= 0
    alpha, beta, codes = alpha[valid], beta[valid], codes[valid]

    classes = sorted(int(c) for c in np.unique(codes))
    if len(classes) != 20:
        raise InconsistentAnchors(
            f"expected 20 realizable sign classes, found {len(classes)}"
        )

    rng = np.random.default_rng(rng_seed)
    left_img: Dict[int, FrozenSet[int]] = {}
    right_img: Dict[int, FrozenSet[int]] = {}
    inv_img: Dict[int, int] = {}
    for c in classes:
        idx = np.nonzero(codes == c)[0]
        if len(idx) > samples_per_class:
            idx = rng.choice(idx, size=samples_per_class, replace=False)
        ca, cb = alpha[idx], beta[idx]
        z = np.zeros_like(ca)
        o = np.ones_like(ca)
        # LEFT: region of A in the frame (B, C)
        la, lb = _canonical_batch(z, o, ca, cb, z, z)
        # RIGHT: region of B in the frame (C, A)
        ra, rb = _canonical_batch(ca, cb, z, z, z, o)
        # INVERSE: region of C in the frame (B, A)
        ia, ib = -ca, 1.0 - cb

        def image(xs, ys):
            cc = _classify_grid(xs, ys, 1e-7)
            cc = cc[cc >= 0]
            return frozenset(int(v) for v in np.unique(cc))

        left_img[c] = image(la, lb)
        right_img[c] = image(ra, rb)
        inv = image(ia, ib)
        if len(inv) != 1:
            raise InconsistentAnchors(f"inverse image of class {c} not unique: {inv}")
        inv_img[c] = next(iter(inv))

    for c in classes:
        if not left_img[c] <= set(classes) or not right_img[c] <= set(classes):
            raise InconsistentAnchors("unary image contains unrealizable class")

    # Anchor constraints on the assignment.
    domains: Dict[int, set] = {c: set(range(1, 21)) for c in classes}
    anchor2 = [c for c in classes if _matches(c, _ANCHOR2)]
    anchor7 = [c for c in classes if _matches(c, _ANCHOR7)]
    if len(anchor2) != 1 or len(anchor7) != 1:
        raise InconsistentAnchors("worked-inequality anchors are not unique")
    domains[anchor2[0]] = {2}
    domains[anchor7[0]] = {7}
    lune_classes = [c for c in classes if (c >> 4 & 1) and (c >> 5 & 1)]
    if len(lune_classes) != 4:
        raise InconsistentAnchors(f"expected 4 lune classes, got {len(lune_classes)}")
    for c in classes:
        if c in lune_classes:
            domains[c] &= {7, 8, 13, 14}
        else:
            domains[c] -= {7, 8, 13, 14}
        # image-cardinality pruning against the unary table
        domains[c] = {
            i
            for i in domains[c]
            if len(UNARY_ROWS[i][0]) == len(left_img[c])
            and len(UNARY_ROWS[i][1]) == len(right_img[c])
        }

    solutions = []
    _search(dict(domains), classes, left_img, right_img, inv_img, solutions, limit=8)
    class_samples = {}
    for c in classes:
        idx = np.nonzero(codes == c)[0]
        if len(idx) > samples_per_class:
            idx = rng.choice(idx, size=samples_per_class, replace=False)
        class_samples[c] = (alpha[idx], beta[idx])
    solutions = [
        s for s in solutions if _compose_anchors_hold(s, class_samples)
    ]
    if not solutions:
        raise InconsistentAnchors("no labeling satisfies the anchors")
    if len(solutions) > 1:
        raise AmbiguousLabeling("multiple labelings satisfy the anchors")
    assignment = solutions[0]
    labeling = RegionLabeling({assignment[c]: _code_signs(c) for c in classes})
    _verify_table1(assignment, left_img, right_img, inv_img)
    return labeling


def _propagate(domains, classes, left_img, right_img, inv_img) -> bool:
    changed = True
    while changed:
        changed = False
        for c in classes:
            dom = domains[c]
            if not dom:
                return False
            # inverse is functional and bijective
            ic = inv_img[c]
            allowed = {UNARY_ROWS[i][2] for i in dom}
            new = domains[ic] & allowed
            if new != domains[ic]:
                domains[ic] = new
                changed = True
            for imgs, col in ((left_img[c], 0), (right_img[c], 1)):
                union = set()
                for i in dom:
                    union.update(UNARY_ROWS[i][col])
                for t in imgs:
                    new = domains[t] & union
                    if new != domains[t]:
                        domains[t] = new
                        changed = True
            # assigned ids are exclusive
            if len(dom) == 1:
                i = next(iter(dom))
                for d in classes:
                    if d != c and i in domains[d]:
                        domains[d] = domains[d] - {i}
                        changed = True
    return True


def _consistent(assign, left_img, right_img, inv_img) -> bool:
    for c, i in assign.items():
        left, right, inv = UNARY_ROWS[i]
        if {assign[t] for t in left_img[c]} != set(left):
            return False
        if {assign[t] for t in right_img[c]} != set(right):
            return False
        if assign[inv_img[c]] != inv:
            return False
    return True


def _search(domains, classes, left_img, right_img, inv_img, solutions, limit=2):
    if len(solutions) >= limit:
        return
    if not _propagate(domains, classes, left_img, right_img, inv_img):
        return
    open_classes = [c for c in classes if len(domains[c]) > 1]
    if not open_classes:
        assign = {c: next(iter(domains[c])) for c in classes}
        if len(set(assign.values())) == 20 and _consistent(
            assign, left_img, right_img, inv_img
        ):
            solutions.append(assign)
        return
    c = min(open_classes, key=lambda c: len(domains[c]))
    for i in sorted(domains[c]):
        branch = {k: set(v) for k, v in domains.items()}
        branch[c] = {i}
        _search(branch, classes, left_img, right_img, inv_img, solutions, limit)
        if len(solutions) >= limit:
            return


def _compose_anchors_hold(assign, class_samples) -> bool:
    """Check a candidate assignment against the worked compose identities.

    Samples pairs (C, D) realizing the left-hand regions and requires the
    ground-truth region of AB:D to stay inside the quoted entry. Extra
    regions falsify a labeling; sampling gaps cannot.
    """
    by_id = {i: c for c, i in assign.items()}
    for (s1, s2), allowed in _COMPOSE_ANCHORS.items():
        ca, cb = class_samples[by_id[s1]]
        ga, gb = class_samples[by_id[s2]]
        n = min(len(ca), len(ga), 300)
        CA = np.repeat(ca[:n], n)
        CB = np.repeat(cb[:n], n)
        GA = np.tile(ga[:n], n)
        GB = np.tile(gb[:n], n)
        # D has canonical coordinates (GA, GB) in the frame (B, C)
        vx = CA
        vy = CB - 1.0
        dx = GA * vy + GB * vx
        dy = -GA * vx + GB * vy
        cc = _classify_grid(dx, 1.0 + dy, 1e-9)
        cc = cc[cc >= 0]
        for code in np.unique(cc):
            if assign[int(code)] not in allowed:
                return False
    return True


def _verify_table1(assign, left_img, right_img, inv_img) -> None:
    if not _consistent(assign, left_img, right_img, inv_img):
        raise InconsistentAnchors("labeling fails unary-table regeneration")


def region_adjacency(
    labeling: RegionLabeling,
    grids: Sequence[int] = (500, 1000),
    domain: float = 5.0,
) -> Dict[int, FrozenSet[int]]:
    """Irreflexive adjacency (shared boundary edge or vertex), numerically.

    Two regions are adjacent when arbitrarily close sample pairs straddle
    them; the straddle radius shrinks with the grid and the result must be
    stable across the listed refinements.
    """
    results = []
    for grid in grids:
        h = 2.0 * domain / grid
        axis = np.linspace(-domain + 0.5 * h, domain - 0.5 * h, grid)
        a, b = np.meshgrid(axis, axis)
        codes = _classify_grid(a.ravel(), b.ravel(), 0.0).reshape(grid, grid)
        ids = np.zeros_like(codes)
        for code, rid in labeling._id_of_code.items():
            ids[codes == code] = rid
        pairs = set()
        for di in range(0, 3):
            for dj in range(-2, 3):
                if di == 0 and dj <= 0:
                    continue
                if dj >= 0:
                    x = ids[: grid - di, : grid - dj]
                    y = ids[di:, dj:]
                else:
                    x = ids[: grid - di, -dj:]
                    y = ids[di:, : grid + dj]
                diff = (x != y) & (x > 0) & (y > 0)
                lo = np.minimum(x[diff], y[diff])
                hi = np.maximum(x[diff], y[diff])
                for key in np.unique(lo * 32 + hi):
                    pairs.add((int(key) // 32, int(key) % 32))
        results.append(pairs)
    for prev, cur in zip(results, results[1:]):
        if prev != cur:
            raise InconsistentAnchors("adjacency relation not stable under refinement")
    adj: Dict[int, set] = {r: set() for r in range(1, 21)}
    for u, v in results[-1]:
        adj[u].add(v)
        adj[v].add(u)
    return {r: frozenset(s) for r, s in adj.items()}
