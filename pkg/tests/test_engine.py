from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from fleetsim.sim.engine import SimulationError, Simulator, ms_to_us, us_to_ms


def test_ties_run_in_scheduling_order():
    sim = Simulator()
    log = []
    sim.schedule(5, log.append, "a")
    sim.schedule(5, log.append, "b")
    sim.run()
    assert log == ["a", "b"]
    assert sim.now_us == 5000


def test_zero_delay_runs_after_current_action():
    sim = Simulator()
    log = []

    def first():
        sim.schedule(0, log.append, ("inner", sim.now_us))
        log.append(("outer", sim.now_us))

    sim.schedule(10, first)
    sim.run()
    assert log == [("outer", 10_000), ("inner", 10_000)]


def test_negative_delay_rejected():
    sim = Simulator()
    with pytest.raises(SimulationError):
        sim.schedule(-1, lambda: None)


def test_scheduling_in_the_past_rejected():
    sim = Simulator()
    sim.run(5000)
    with pytest.raises(SimulationError):
        sim.at_us(4999, lambda: None)


def test_cancel():
    sim = Simulator()
    log = []
    eid = sim.schedule(1, log.append, 1)
    sim.schedule(2, log.append, 2)
    sim.cancel(eid)
    assert sim.pending() == 1
    sim.run()
    assert log == [2]


def test_run_until_advances_clock():
    sim = Simulator()
    log = []
    sim.schedule(3, log.append, 3)
    sim.schedule(7, log.append, 7)
    sim.run_ms(5)
    assert log == [3] and sim.now_ms == 5.0
    assert sim.peek_time_us() == 7000


def test_stop():
    sim = Simulator()
    log = []
    sim.schedule(1, lambda: (log.append(1), sim.stop()))
    sim.schedule(2, log.append, 2)
    sim.run()
    assert log == [1]
    sim.run()
    assert log == [1, 2]


def test_events_snapshot_order():
    sim = Simulator()
    sim.schedule(2, print)
    sim.schedule(1, print)
    assert [e.time for e in sim.events()] == [1000, 2000]


def test_unit_conversion():
    assert ms_to_us(33.3) == 33_300
    assert us_to_ms(1500) == 1.5


@given(st.lists(st.integers(0, 50), max_size=40))
def test_execution_order_is_time_then_seq(delays):
    sim = Simulator()
    log = []
    for k, d in enumerate(delays):
        sim.schedule(d, lambda k=k, d=d: log.append((sim.now_us, k)))
    sim.run()
    assert log == sorted((d * 1000, k) for k, d in enumerate(delays))
    assert [t for t, _ in log] == sorted(t for t, _ in log)


def test_same_seed_same_draws():
    assert [Simulator(3).rng.random() for _ in range(3)] == [Simulator(3).rng.random() for _ in range(3)]
