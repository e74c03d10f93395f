"""Unary and composition operators over qualitative states.

The three unary operators come straight from the hand-derived table. The
composition operator is a 400-entry lookup generated offline: entry (s1, s2)
contains every region s3 for which a joint placement (alpha, beta, gamma,
delta) of the third and fourth landmark exists satisfying s1's inequalities
in the base frame, s2's in the shifted frame, and s3's for the composed
relation, decided by the branch-and-bound feasibility solver.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ._table1 import UNARY_ROWS
from .edc import RegionLabeling, SignVector
from .errors import AnchorMismatch, BudgetExceeded, CorruptTable
from .qfeas import QuadConstraint, Rect, SolverConfig, solve_lp_guided
from .states import FULL_MASK, StateSet

_LEFT_MASKS = [None] + [StateSet(UNARY_ROWS[r][0]).mask for r in range(1, 21)]
_RIGHT_MASKS = [None] + [StateSet(UNARY_ROWS[r][1]).mask for r in range(1, 21)]
_INVERSE = [None] + [UNARY_ROWS[r][2] for r in range(1, 21)]


@dataclass(frozen=True)
class UnaryTables:
    left: Tuple[StateSet, ...]
    right: Tuple[StateSet, ...]
    inverse: Tuple[int, ...]


def unary_tables() -> UnaryTables:
    return UnaryTables(
        left=tuple(StateSet.from_mask(m) for m in _LEFT_MASKS[1:]),
        right=tuple(StateSet.from_mask(m) for m in _RIGHT_MASKS[1:]),
        inverse=tuple(_INVERSE[1:]),
    )


def _apply(masks, s: StateSet) -> StateSet:
    if s.is_empty():
        raise ValueError("unary operators require a non-empty state set")
    out = 0
    for r in s:
        out |= masks[r]
    return StateSet.from_mask(out)


def apply_left(s: StateSet) -> StateSet:
    """Image of AB:C states as BC:A states."""
    return _apply(_LEFT_MASKS, s)


def apply_right(s: StateSet) -> StateSet:
    """Image of AB:C states as CA:B states."""
    return _apply(_RIGHT_MASKS, s)


def apply_inverse(s: StateSet) -> StateSet:
    """Image of AB:C states as BA:C states (a bijection on singletons)."""
    if s.is_empty():
        raise ValueError("unary operators require a non-empty state set")
    out = 0
    for r in s:
        out |= 1 << (_INVERSE[r] - 1)
    return StateSet.from_mask(out)


def invert_region(r: int) -> int:
    return _INVERSE[r]


# ---------------------------------------------------------------------------
# Boundary expressions in the joint frame A=(0,0), B=(0,1), C=(a,b), D=(g,d).
# Variables are ordered (a, b, g, d). Each entry is (A, b, c) of the k-th
# expression; the region's k-th sign fixes the inequality direction.

def _expr(quad=(), lin=(), const=0.0):
    A = np.zeros((4, 4))
    for i, j, v in quad:
        A[i, j] += 0.5 * v
        A[j, i] += 0.5 * v
    b = np.zeros(4)
    for i, v in lin:
        b[i] += v
    return A, b, float(const)


_UPPER_EXPRS = [
    _expr(lin=[(0, -1.0)]),
    _expr(lin=[(1, -1.0)]),
    _expr(lin=[(1, -1.0)], const=1.0),
    _expr(lin=[(1, -2.0)], const=1.0),
    _expr(quad=[(0, 0, -1.0), (1, 1, -1.0)], const=1.0),
    _expr(quad=[(0, 0, -1.0), (1, 1, -1.0)], lin=[(1, 2.0)]),
]

_MIDDLE_EXPRS = [
    _expr(quad=[(0, 3, 1.0), (1, 2, -1.0)], lin=[(2, 1.0), (0, -1.0)]),
    _expr(quad=[(1, 3, -1.0), (0, 2, -1.0)], lin=[(1, 1.0), (3, 1.0)], const=-1.0),
    _expr(
        quad=[(0, 0, 1.0), (1, 1, 1.0), (1, 3, -1.0), (0, 2, -1.0)],
        lin=[(3, 1.0), (1, -1.0)],
    ),
    _expr(
        quad=[(0, 0, 1.0), (1, 1, 1.0), (1, 3, -2.0), (0, 2, -2.0)],
        lin=[(3, 2.0)],
        const=-1.0,
    ),
    _expr(
        quad=[(0, 0, 1.0), (1, 1, 1.0), (2, 2, -1.0), (3, 3, -1.0)],
        lin=[(3, 2.0), (1, -2.0)],
    ),
    _expr(
        quad=[(0, 2, 2.0), (1, 3, 2.0), (2, 2, -1.0), (3, 3, -1.0)],
        lin=[(1, -2.0)],
        const=1.0,
    ),
]

_LOWER_EXPRS = [
    _expr(lin=[(2, -1.0)]),
    _expr(lin=[(3, -1.0)]),
    _expr(lin=[(3, -1.0)], const=1.0),
    _expr(lin=[(3, -2.0)], const=1.0),
    _expr(quad=[(2, 2, -1.0), (3, 3, -1.0)], const=1.0),
    _expr(quad=[(2, 2, -1.0), (3, 3, -1.0)], lin=[(3, 2.0)]),
]


def _block_constraints(signs: SignVector, exprs) -> List[QuadConstraint]:
    """Constraints pinning a point to a region: expr_k sign-matched and < 0."""
    out = []
    for (A, b, c), s in zip(exprs, signs):
        if s < 0:
            out.append(QuadConstraint(A, b, c))
        else:
            out.append(QuadConstraint(-A, -b, -c))
    return out


@dataclass
class CompositionTable:
    """400-entry lookup (s1, s2) -> feasible composed states, with metadata."""

    masks: List[List[int]]  # masks[s1-1][s2-1]
    depth: int
    bound: float
    labeling_checksum: str
    flagged: List[Tuple[int, int, int]] = field(default_factory=list)

    def entry(self, s1: int, s2: int) -> StateSet:
        return StateSet.from_mask(self.masks[s1 - 1][s2 - 1])


def compose(s1: StateSet, s2: StateSet, table: CompositionTable) -> StateSet:
    """Union of table entries over all region pairs in s1 x s2."""
    if s1.is_empty() or s2.is_empty():
        raise ValueError("compose requires non-empty state sets")
    out = 0
    masks = table.masks
    for a in s1:
        row = masks[a - 1]
        for b in s2:
            out |= row[b - 1]
        if out == FULL_MASK:
            break
    return StateSet.from_mask(out)


_ANCHOR_ENTRIES = {
    (1, 5): StateSet({1, 5, 11, 12, 17, 19}),
    (5, 5): StateSet({12, 17, 18, 19, 20}),
    (11, 5): StateSet({17, 18, 19, 20}),
}


def cell_constraints(labeling: RegionLabeling, s1: int, s2: int, s3: int) -> List[QuadConstraint]:
    """The 18 inequalities pinning (alpha, beta, gamma, delta) to a cell."""
    return (
        _block_constraints(labeling.by_region[s1], _UPPER_EXPRS)
        + _block_constraints(labeling.by_region[s2], _MIDDLE_EXPRS)
        + _block_constraints(labeling.by_region[s3], _LOWER_EXPRS)
    )


def _presample_witnesses(labeling: RegionLabeling, bound: float, seed: int):
    """Witness points for cells hit by multi-scale random placement of C, D.

    Every witness proves its cell feasible outright; the rectangle search
    then only has to settle the cells sampling never reaches.
    """
    code_to_region = np.zeros(64, dtype=np.int64)
    for r in range(1, 21):
        code = 0
        for k, s in enumerate(labeling.by_region[r]):
            if s > 0:
                code |= 1 << k
        code_to_region[code] = r

    def classify(ax, ay):
        e = np.stack([
            -ax, -ay, 1.0 - ay, 1.0 - 2.0 * ay,
            1.0 - (ax * ax + ay * ay),
            2.0 * ay - (ax * ax + ay * ay),
        ])
        code = np.zeros(ax.shape, dtype=np.int64)
        for k in range(6):
            code |= (e[k] > 0).astype(np.int64) << k
        near = np.abs(e).min(axis=0) < 1e-9
        return code_to_region[code], near

    rng = np.random.default_rng(seed)
    witnesses = {}
    scales = [bound, bound / 30.0, 3.0, 1.2]
    for scale in scales:
        for _ in range(4):
            cd = rng.uniform(-scale, scale, (500_000, 4))
            ax, ay, gx, gy = cd[:, 0], cd[:, 1], cd[:, 2], cd[:, 3]
            s1, bad1 = classify(ax, ay)
            vx, vy = ax, ay - 1.0
            d2 = vx * vx + vy * vy
            with np.errstate(divide="ignore", invalid="ignore"):
                a2 = (vy * (gx - 0.0) - vx * (gy - 1.0)) / d2
                b2 = (vx * (gx - 0.0) + vy * (gy - 1.0)) / d2
            s2, bad2 = classify(a2, b2)
            s3, bad3 = classify(gx, gy)
            ok = (s1 > 0) & (s2 > 0) & (s3 > 0) & ~bad1 & ~bad2 & ~bad3 & (d2 > 1e-12)
            idx = np.nonzero(ok)[0]
            for i in idx:
                key = (int(s1[i]), int(s2[i]), int(s3[i]))
                if key not in witnesses:
                    witnesses[key] = cd[i]
    return witnesses


def generate_composition_table(
    labeling: RegionLabeling,
    cfg: Optional[SolverConfig] = None,
    bound: float = 1000.0,
    progress=None,
) -> CompositionTable:
    """Solve the 8000 joint feasibility problems and assemble the table.

    Cells first checked against presampled witness placements (each verified
    strictly against the cell's constraints); the remainder go through the
    rectangle search with surrogate pruning and root box reduction. Cells
    whose solver budget is exhausted are flagged and their composed state
    kept, a sound over-approximation.
    """
    if cfg is None:
        cfg = SolverConfig(max_depth=60, hard_cap=500_000,
                           pair_sums=True, shrink_root=True)
    if cfg.max_depth < 60:
        raise ValueError("offline table generation requires depth >= 60")
    box = Rect(np.full(4, -bound), np.full(4, bound))
    witnesses = _presample_witnesses(labeling, bound, cfg.rng_seed + 777)
    masks = [[0] * 20 for _ in range(20)]
    flagged = []
    for s1 in range(1, 21):
        for s2 in range(1, 21):
            m = 0
            for s3 in range(1, 21):
                cons = cell_constraints(labeling, s1, s2, s3)
                w = witnesses.get((s1, s2, s3))
                if w is not None and all(con.value(w) < 0.0 for con in cons):
                    m |= 1 << (s3 - 1)
                    continue
                seed = (cfg.rng_seed * 8000 + (s1 - 1) * 400 + (s2 - 1) * 20 + s3) & 0x7FFFFFFF
                cell_cfg = SolverConfig(
                    cfg.max_depth, cfg.eps_volume, seed, cfg.hard_cap,
                    pair_sums=cfg.pair_sums, shrink_root=cfg.shrink_root,
                )
                try:
                    feasible = solve_lp_guided(cons, box, cell_cfg).feasible
                except BudgetExceeded:
                    flagged.append((s1, s2, s3))
                    feasible = True
                if feasible:
                    m |= 1 << (s3 - 1)
            masks[s1 - 1][s2 - 1] = m
            if progress is not None:
                progress(s1, s2, m)
    table = CompositionTable(masks, cfg.max_depth, bound, labeling.checksum(), flagged)
    _check_anchors(table)
    return table


def _check_anchors(table: CompositionTable) -> None:
    for (s1, s2), want in _ANCHOR_ENTRIES.items():
        if table.entry(s1, s2) != want:
            raise AnchorMismatch(
                f"entry ({s1},{s2}) = {table.entry(s1, s2)}, expected {want}"
            )


# ---------------------------------------------------------------------------
# Serialization: versioned text, whole-file content checksum, labeling inline.

_MAGIC = "qrmap-tables v1"


def _table_lines(table: CompositionTable, labeling: RegionLabeling) -> List[str]:
    lines = [_MAGIC]
    lines.append(f"depth {table.depth}")
    lines.append(f"bound {table.bound!r}")
    lines.append(f"labeling_checksum {labeling.checksum()}")
    for r in range(1, 21):
        signs = " ".join(str(s) for s in labeling.by_region[r])
        lines.append(f"labeling {r} {signs}")
    for s1, s2, s3 in table.flagged:
        lines.append(f"flagged {s1} {s2} {s3}")
    for s1 in range(1, 21):
        for s2 in range(1, 21):
            members = " ".join(str(r) for r in table.entry(s1, s2))
            lines.append(f"entry {s1} {s2} : {members}")
    return lines


def save_tables(table: CompositionTable, labeling: RegionLabeling, path) -> None:
    if table.labeling_checksum != labeling.checksum():
        raise ValueError("table was generated against a different labeling")
    lines = _table_lines(table, labeling)
    digest = hashlib.sha256("\n".join(lines).encode()).hexdigest()
    with open(path, "w") as f:
        f.write("\n".join(lines))
        f.write(f"\nchecksum {digest}\n")


def load_tables(path) -> Tuple[CompositionTable, RegionLabeling]:
    """Load and verify a table file; returns (table, labeling)."""
    with open(path) as f:
        raw = f.read().splitlines()
    if not raw or raw[0] != _MAGIC:
        raise CorruptTable("bad header")
    if not raw[-1].startswith("checksum "):
        raise CorruptTable("missing checksum line")
    digest = hashlib.sha256("\n".join(raw[:-1]).encode()).hexdigest()
    if raw[-1].split()[1] != digest:
        raise CorruptTable("content checksum mismatch")
    depth = None
    bound = None
    lab_checksum = None
    by_region: Dict[int, SignVector] = {}
    flagged = []
    masks = [[0] * 20 for _ in range(20)]
    seen = set()
    try:
        for line in raw[1:-1]:
            parts = line.split()
            if parts[0] == "depth":
                depth = int(parts[1])
            elif parts[0] == "bound":
                bound = float(parts[1])
            elif parts[0] == "labeling_checksum":
                lab_checksum = parts[1]
            elif parts[0] == "labeling":
                by_region[int(parts[1])] = tuple(int(v) for v in parts[2:8])
            elif parts[0] == "flagged":
                flagged.append(tuple(int(v) for v in parts[1:4]))
            elif parts[0] == "entry":
                s1, s2 = int(parts[1]), int(parts[2])
                members = [int(v) for v in parts[4:]]
                if not members:
                    raise CorruptTable(f"empty entry ({s1},{s2})")
                masks[s1 - 1][s2 - 1] = StateSet(members).mask
                seen.add((s1, s2))
            else:
                raise CorruptTable(f"unknown line: {line}")
        labeling = RegionLabeling(by_region)
    except CorruptTable:
        raise
    except Exception as exc:
        raise CorruptTable(f"parse failure: {exc}") from exc
    if depth is None or bound is None or len(seen) != 400:
        raise CorruptTable("incomplete table")
    if labeling.checksum() != lab_checksum:
        raise CorruptTable("labeling checksum mismatch")
    table = CompositionTable(masks, depth, bound, lab_checksum, flagged)
    _check_anchors(table)
    return table, labeling
