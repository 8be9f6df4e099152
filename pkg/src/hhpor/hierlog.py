"""Write-counter arithmetic for the hierarchical log.

W is the global number of completed writes and w = W mod n the writes since
the last rebuild of C.  Level l is occupied exactly when bit l of w is set.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .params import Address, EmptyLevelError, epoch_of_level


def target_level(w: int, n: int) -> int:
    """Level filled by the write arriving when the local counter is w.

    Returns k = log2(n) for w = n - 1; that write rebuilds C instead.
    """
    if not 0 <= w < n:
        raise ValueError(f"w={w} out of range for n={n}")
    return ((w + 1) & -(w + 1)).bit_length() - 1


def occupied_levels(w: int) -> list[int]:
    return [l for l in range(w.bit_length()) if (w >> l) & 1]


@dataclass(frozen=True)
class LogSchedule:
    n: int
    W: int

    @property
    def w(self) -> int:
        return self.W % self.n

    @property
    def k(self) -> int:
        return self.n.bit_length() - 1

    @property
    def occupied(self) -> list[int]:
        return occupied_levels(self.w)

    @property
    def c_epoch(self) -> int:
        return self.n * (self.W // self.n)

    def level_epoch(self, level: int) -> int:
        return self.W - self.w + epoch_of_level(self.w, level)

    def level_start(self, level: int) -> int:
        """Local write index of the oldest input in ``level``."""
        return epoch_of_level(self.w, level) - (1 << level)


def slot_epoch(addr: Address, n: int, W: int) -> int:
    sched = LogSchedule(n, W)
    if addr.structure == "C":
        if addr.slot >= n:
            raise ValueError("C slot out of range")
        return sched.c_epoch
    if addr.structure == "H":
        return sched.level_epoch(addr.level)
    raise ValueError("U epochs live in the position map, not the schedule")


def level_addresses(level: int) -> list[Address]:
    return [Address("H", level, side, s) for side in ("X", "Y") for s in range(1 << level)]


def c_addresses(n: int) -> list[Address]:
    return [Address("C", None, side, s) for side in ("X", "Y") for s in range(n)]


def codeword_position(addr: Address, n: int) -> int:
    size = n if addr.structure == "C" else 1 << addr.level
    return addr.slot + (size if addr.side == "Y" else 0)


def audit_addresses(w: int, n: int, c: int, rng: random.Random, include_c: bool = True) -> list[Address]:
    """c distinct random slots from every occupied level and from C.

    Levels smaller than c are challenged in full.
    """
    if c < 1:
        raise ValueError("need at least one challenge per level")
    groups = [level_addresses(l) for l in occupied_levels(w)]
    if include_c:
        groups.append(c_addresses(n))
    out = []
    for group in groups:
        out.extend(rng.sample(group, min(c, len(group))))
    return out


__all__ = [
    "EmptyLevelError",
    "LogSchedule",
    "audit_addresses",
    "c_addresses",
    "codeword_position",
    "level_addresses",
    "occupied_levels",
    "slot_epoch",
    "target_level",
]
