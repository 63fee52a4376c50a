from __future__ import annotations

import threading

from kernels.counters import OpCounts, absorb, counting, tally


def test_tally_outside_counting_is_dropped():
    tally("padd", 5)
    with counting() as counts:
        pass
    assert counts.padd == 0


def test_nested_counting_records_innermost_only():
    with counting() as outer:
        tally("field_mul")
        with counting() as inner:
            tally("field_mul", 3)
        tally("pdbl")
    assert inner.field_mul == 3
    assert outer.field_mul == 1
    assert outer.pdbl == 1


def test_worker_counts_are_absorbed():
    gathered = []

    def work():
        with counting() as counts:
            tally("padd", 7)
            tally("padd_occupied", 2)
        gathered.append(counts)

    thread = threading.Thread(target=work)
    with counting() as counts:
        thread.start()
        thread.join()
        assert counts.padd == 0
        absorb(gathered[0])
    assert counts.padd == 7
    assert counts.padd_occupied == 2


def test_merge_adds_every_kind():
    a = OpCounts(field_mul=1, mac=2)
    a.merge(OpCounts(field_mul=4, settle=1))
    assert a.as_dict() == {**OpCounts().as_dict(), "field_mul": 5, "mac": 2, "settle": 1}
