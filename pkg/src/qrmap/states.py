"""Qualitative state sets over the 20 extended double-cross regions.

Regions are identified by plain integers 1..20. A StateSet is an immutable
bit-vector over those ids; it is the unit of qualitative knowledge stored in
map edges and produced by measurements and operators.
"""

from __future__ import annotations

from typing import Iterable, Iterator

N_REGIONS = 20
FULL_MASK = (1 << N_REGIONS) - 1

#: Region ids whose union is exactly the lune between the two base landmarks.
LUNE_REGIONS = frozenset({7, 8, 13, 14})


def check_region(r: int) -> int:
    if not 1 <= r <= N_REGIONS:
        raise ValueError(f"region id out of range: {r!r}")
    return r


class StateSet:
    """Immutable subset of the region ids 1..20, backed by a bitmask."""

    __slots__ = ("mask",)

    def __init__(self, regions: Iterable[int] = ()):
        m = 0
        for r in regions:
            m |= 1 << (check_region(r) - 1)
        object.__setattr__(self, "mask", m)

    def __setattr__(self, name, value):
        raise AttributeError("StateSet is immutable")

    def __reduce__(self):
        return (StateSet.from_mask, (self.mask,))

    @classmethod
    def from_mask(cls, mask: int) -> "StateSet":
        if mask & ~FULL_MASK:
            raise ValueError(f"mask has bits outside 1..{N_REGIONS}: {mask:#x}")
        s = cls.__new__(cls)
        object.__setattr__(s, "mask", mask)
        return s

    @classmethod
    def full(cls) -> "StateSet":
        return cls.from_mask(FULL_MASK)

    @classmethod
    def single(cls, r: int) -> "StateSet":
        return cls.from_mask(1 << (check_region(r) - 1))

    def is_empty(self) -> bool:
        return self.mask == 0

    def is_singleton(self) -> bool:
        m = self.mask
        return m != 0 and (m & (m - 1)) == 0

    def __contains__(self, r: int) -> bool:
        return bool(self.mask >> (r - 1) & 1)

    def __iter__(self) -> Iterator[int]:
        m = self.mask
        r = 1
        while m:
            if m & 1:
                yield r
            m >>= 1
            r += 1

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def __and__(self, other: "StateSet") -> "StateSet":
        return StateSet.from_mask(self.mask & other.mask)

    def __or__(self, other: "StateSet") -> "StateSet":
        return StateSet.from_mask(self.mask | other.mask)

    def issubset(self, other: "StateSet") -> bool:
        return self.mask & ~other.mask == 0

    def __eq__(self, other) -> bool:
        return isinstance(other, StateSet) and self.mask == other.mask

    def __hash__(self) -> int:
        return hash(self.mask)

    def __repr__(self) -> str:
        return "StateSet({%s})" % ", ".join(str(r) for r in self)


FULL_SET = StateSet.full()
LUNE_SET = StateSet(LUNE_REGIONS)
