"""The qualitative relational map and its measurement-fusion algorithm.

The map is a complete 3-uniform hypergraph over landmark ids. Each edge
(one per unordered landmark triple) stores state sets for the three cyclic
relations of its sorted triple (a, b, c): ab:c, bc:a and ca:b; the swapped
orientations are derived on demand through the inverse operator and need no
storage of their own.

Fusion intersects a measurement into its stored relation and propagates the
change with a worklist until quiescence: every changed relation regenerates
its two cyclic rotations and, against every other node in the map, the four
composition rules in which it can appear (first or second argument, directly
or inverted). Because all updates are intersections, the fixed point is the
same whatever order measurements or worklist items are processed in.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Dict, Iterable, List, Tuple

from .errors import Contradiction, MissingEdge
from .operators import (
    CompositionTable,
    apply_inverse,
    apply_left,
    apply_right,
    compose,
)
from .states import FULL_SET, StateSet

Triple = Tuple[int, int, int]


@dataclass
class FusionStats:
    """Bookkeeping for one fusion call."""

    states_removed: int = 0
    relations_changed: int = 0
    propagation_depth: int = 0
    wall_time: float = 0.0


def _edge_key(ids: Iterable[int]) -> Triple:
    a, b, c = sorted(ids)
    if a == b or b == c:
        raise ValueError(f"triple must be distinct: {ids!r}")
    return (a, b, c)


def _resolve(ordered: Triple) -> Tuple[Triple, int, bool]:
    """Map an ordered relation XY:Z to (edge key, slot, inverted).

    Slots hold the cyclic rotations of the sorted triple; the other three
    orientations are inverses of those.
    """
    key = _edge_key(ordered)
    a, b, c = key
    rotations = ((a, b, c), (b, c, a), (c, a, b))
    if ordered in rotations:
        return key, rotations.index(ordered), False
    x, y, z = ordered
    return key, rotations.index((y, x, z)), True


class QualMap:
    """Complete 3-uniform hypergraph of qualitative landmark relations."""

    def __init__(self):
        self.nodes: List[int] = []
        self._node_set: set = set()
        self.edges: Dict[Triple, List[StateSet]] = {}

    def __contains__(self, node: int) -> bool:
        return node in self._node_set

    def add_node(self, node: int) -> None:
        """Insert a landmark and edges joining it to all existing pairs."""
        if node in self._node_set:
            return
        for i, a in enumerate(self.nodes):
            for b in self.nodes[i + 1 :]:
                self.edges[_edge_key((a, b, node))] = [
                    FULL_SET, FULL_SET, FULL_SET,
                ]
        self.nodes.append(node)
        self._node_set.add(node)

    def has_edge(self, ids: Iterable[int]) -> bool:
        try:
            return _edge_key(ids) in self.edges
        except ValueError:
            return False

    def get_relation(self, ordered: Triple) -> StateSet:
        """Stored states of the ordered relation XY:Z, inverting on demand."""
        key, slot, inverted = _resolve(tuple(ordered))
        if key not in self.edges:
            raise MissingEdge(f"no edge for triple {key}")
        s = self.edges[key][slot]
        return apply_inverse(s) if inverted else s

    def open_states(self) -> int:
        """Total number of open states over all stored relations."""
        return sum(len(s) for slots in self.edges.values() for s in slots)

    def fully_constrained(self, ids: Iterable[int]) -> bool:
        return all(s.is_singleton() for s in self.edges[_edge_key(ids)])

    def copy(self) -> "QualMap":
        m = QualMap()
        m.nodes = list(self.nodes)
        m._node_set = set(self._node_set)
        m.edges = {k: list(v) for k, v in self.edges.items()}
        return m


def get_relation(qmap: QualMap, ordered: Triple) -> StateSet:
    return qmap.get_relation(ordered)


class _Fuser:
    """One fusion pass: intersection updates plus worklist propagation."""

    def __init__(self, qmap: QualMap, table: CompositionTable):
        self.map = qmap
        self.table = table
        self.undo: List[Tuple[Triple, int, StateSet]] = []
        self.stats = FusionStats()
        self.queue = deque()
        self.queued: set = set()

    def update(self, ordered: Triple, states: StateSet, depth: int) -> None:
        """Intersect the ordered relation with a candidate state set."""
        key, slot, inverted = _resolve(ordered)
        if inverted:
            states = apply_inverse(states)
        stored = self.map.edges[key][slot]
        merged = stored & states
        if merged == stored:
            return
        if merged.is_empty():
            raise Contradiction(
                f"relation {ordered} emptied: stored {stored}, update {states}"
            )
        self.undo.append((key, slot, stored))
        self.map.edges[key][slot] = merged
        self.stats.states_removed += len(stored) - len(merged)
        self.stats.relations_changed += 1
        self.stats.propagation_depth = max(
            self.stats.propagation_depth, depth
        )
        a, b, c = key
        changed = ((a, b, c), (b, c, a), (c, a, b))[slot]
        if (key, slot) not in self.queued:
            self.queued.add((key, slot))
            self.queue.append((changed, depth))

    def propagate(self) -> None:
        while self.queue:
            (p, q, r), depth = self.queue.popleft()
            self.queued.discard((_edge_key((p, q, r)), _resolve((p, q, r))[1]))
            rel = self.map.get_relation((p, q, r))
            # Cyclic rotations constrain the other two slots of the edge.
            self.update((q, r, p), apply_left(rel), depth + 1)
            self.update((r, p, q), apply_right(rel), depth + 1)
            inv = apply_inverse(rel)
            for x in self.map.nodes:
                if x == p or x == q or x == r:
                    continue
                # PQ:R composed with QR:X bounds PQ:X.
                self.update(
                    (p, q, x),
                    compose(rel, self.map.get_relation((q, r, x)), self.table),
                    depth + 1,
                )
                # XP:Q composed with PQ:R bounds XP:R.
                self.update(
                    (x, p, r),
                    compose(self.map.get_relation((x, p, q)), rel, self.table),
                    depth + 1,
                )
                # QP:R composed with PR:X bounds QP:X.
                self.update(
                    (q, p, x),
                    compose(inv, self.map.get_relation((p, r, x)), self.table),
                    depth + 1,
                )
                # XQ:P composed with QP:R bounds XQ:R.
                self.update(
                    (x, q, r),
                    compose(self.map.get_relation((x, q, p)), inv, self.table),
                    depth + 1,
                )

    def rollback(self) -> None:
        for key, slot, old in reversed(self.undo):
            self.map.edges[key][slot] = old


def fuse(qmap: QualMap, measurement, table: CompositionTable) -> FusionStats:
    """Fold one triple measurement into the map.

    Missing landmarks are added first (new relations start fully open). The
    measured relation is intersected with its stored set and any change is
    propagated to a fixed point. A Contradiction rolls the map back to its
    pre-fuse state before surfacing, so a bad association cannot corrupt the
    map.
    """
    t0 = time.perf_counter()
    for node in measurement.ids:
        qmap.add_node(node)
    worker = _Fuser(qmap, table)
    try:
        worker.update(tuple(measurement.ids), measurement.states, 0)
        worker.propagate()
    except Contradiction:
        worker.rollback()
        raise
    worker.stats.wall_time = time.perf_counter() - t0
    return worker.stats


def gate_association(
    qmap: QualMap, candidate_states: Dict[Triple, StateSet]
) -> bool:
    """Whether a candidate association is consistent with the stored map.

    candidate_states maps ordered relations (phrased against the candidate's
    hypothesised id) to the state sets measured for them; the association
    survives only if every such set overlaps the stored one.
    """
    for ordered, states in candidate_states.items():
        if (qmap.get_relation(ordered) & states).is_empty():
            return False
    return True


def dump_map(qmap: QualMap) -> str:
    """One line per edge: the sorted triple and its three state lists."""
    lines = []
    for key in sorted(qmap.edges):
        slots = qmap.edges[key]
        lists = ";".join(",".join(str(r) for r in s) for s in slots)
        lines.append("%d %d %d %s" % (key[0], key[1], key[2], lists))
    return "\n".join(lines) + "\n"


def load_map(text: str) -> QualMap:
    qmap = QualMap()
    for line in text.strip().splitlines():
        head, lists = line.split(" ", 3)[:3], line.split(" ", 3)[3]
        a, b, c = (int(v) for v in head)
        for node in (a, b, c):
            qmap.add_node(node)
        slots = []
        for part in lists.split(";"):
            slots.append(StateSet(int(v) for v in part.split(",") if v))
        if len(slots) != 3 or any(s.is_empty() for s in slots):
            raise ValueError(f"bad map line: {line!r}")
        qmap.edges[_edge_key((a, b, c))] = slots
    return qmap
