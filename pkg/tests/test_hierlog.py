import random

import pytest
from hypothesis import given, strategies as st

from hhpor.hierlog import (
    LogSchedule,
    audit_addresses,
    c_addresses,
    codeword_position,
    level_addresses,
    occupied_levels,
    slot_epoch,
    target_level,
)
from hhpor.params import Address, EmptyLevelError


def test_target_level_examples():
    assert target_level(0, 8) == 0
    assert target_level(3, 8) == 2
    assert target_level(5, 8) == 1
    assert target_level(7, 8) == 3  # k: rebuild C
    with pytest.raises(ValueError):
        target_level(8, 8)


def test_occupied_examples():
    assert occupied_levels(0) == []
    assert occupied_levels(5) == [0, 2]
    assert occupied_levels(15) == [0, 1, 2, 3]


def test_slot_epoch_examples():
    assert slot_epoch(Address("H", 0, "X", 0), 4, 5) == 5
    assert slot_epoch(Address("C", None, "Y", 3), 4, 5) == 4
    with pytest.raises(EmptyLevelError):
        slot_epoch(Address("H", 1, "X", 0), 4, 5)
    with pytest.raises(ValueError):
        slot_epoch(Address("U", slot=0), 4, 5)


@given(st.integers(1, 10), st.data())
def test_schedule_walk(k, data):
    """Replay writes one by one and check the counter invariants."""
    n = 1 << k
    levels: dict[int, int] = {}  # level -> epoch
    for W in range(data.draw(st.integers(1, 3 * n))):
        w = W % n
        l = target_level(w, n)
        assert all(j in levels for j in range(l)) and l not in levels
        if l == k:
            levels.clear()
        else:
            for j in range(l):
                del levels[j]
            prev = levels.get(l)
            levels[l] = W + 1
            assert prev is None or prev < W + 1
        sched = LogSchedule(n, W + 1)
        assert sorted(levels) == sched.occupied
        assert sum(1 << j for j in levels) == sched.w
        for j, e in levels.items():
            assert sched.level_epoch(j) == e


def test_audit_address_counts():
    rng = random.Random(0)
    assert all(a.structure == "C" for a in audit_addresses(0, 4, 1, rng))
    addrs = audit_addresses(5, 4, 8, rng)
    # level 0 has 2 slots, level 2 has 8, C has 8
    assert len(addrs) == 2 + 8 + 8 and len(set(addrs)) == len(addrs)
    assert {a.level for a in addrs if a.structure == "H"} == {0, 2}
    with pytest.raises(ValueError):
        audit_addresses(5, 4, 0, rng)


def test_uncapped_count_is_c_times_groups():
    addrs = audit_addresses(0b10100, 32, 8, random.Random(1))
    assert len(addrs) == 8 * 3


def test_codeword_positions():
    assert [codeword_position(a, 4) for a in level_addresses(1)] == [0, 1, 2, 3]
    assert [codeword_position(a, 4) for a in c_addresses(4)] == list(range(8))
