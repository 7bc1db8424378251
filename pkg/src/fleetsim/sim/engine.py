"""Single-threaded discrete-event loop on an integer microsecond clock."""
from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

US_PER_MS = 1000


def ms_to_us(ms: float) -> int:
    return int(round(ms * US_PER_MS))


def us_to_ms(us: int) -> float:
    return us / US_PER_MS


class SimulationError(RuntimeError):
    pass


@dataclass(order=True)
class SimEvent:
    time: int
    seq: int
    action: Callable[..., Any] = field(compare=False)
    args: tuple = field(compare=False, default=())


class Simulator:
    """Events run in (time, seq) order; ``seq`` is the scheduling order."""

    def __init__(self, seed: int = 0):
        self.now_us = 0
        self.rng = random.Random(seed)
        self._queue: list[tuple] = []
        self._seq = itertools.count()
        self._cancelled: set[int] = set()
        self._stopped = False
        self.executed = 0

    @property
    def now_ms(self) -> float:
        return us_to_ms(self.now_us)

    def schedule(self, delay_ms: float, action: Callable[..., Any], *args) -> int:
        if delay_ms < 0:
            raise SimulationError(f"negative delay {delay_ms} ms")
        return self.schedule_us(ms_to_us(delay_ms), action, *args)

    def schedule_us(self, delay_us: int, action: Callable[..., Any], *args) -> int:
        if delay_us < 0:
            raise SimulationError(f"negative delay {delay_us} us")
        return self.at_us(self.now_us + delay_us, action, *args)

    def at_us(self, time_us: int, action: Callable[..., Any], *args) -> int:
        if time_us < self.now_us:
            raise SimulationError(f"cannot schedule at {time_us} us, clock is at {self.now_us} us")
        seq = next(self._seq)
        # plain tuples compare much faster than dataclass instances
        heapq.heappush(self._queue, (int(time_us), seq, action, args))
        return seq

    def cancel(self, event_id: int) -> None:
        self._cancelled.add(event_id)

    def stop(self) -> None:
        """Stop after the current action returns."""
        self._stopped = True

    def pending(self) -> int:
        return sum(1 for item in self._queue if item[1] not in self._cancelled)

    def events(self) -> list[SimEvent]:
        """Snapshot of the queue in execution order."""
        return [SimEvent(*item) for item in sorted(self._queue) if item[1] not in self._cancelled]

    def peek_time_us(self) -> Optional[int]:
        queue = self._queue
        while queue and queue[0][1] in self._cancelled:
            self._cancelled.discard(heapq.heappop(queue)[1])
        return queue[0][0] if queue else None

    def step(self) -> bool:
        if self.peek_time_us() is None:
            return False
        time_us, _, action, args = heapq.heappop(self._queue)
        self.now_us = time_us
        self.executed += 1
        action(*args)
        return True

    def run(self, until_us: Optional[int] = None) -> None:
        """Run events with time <= ``until_us`` (all if None) or until stopped."""
        self._stopped = False
        while not self._stopped:
            t = self.peek_time_us()
            if t is None or (until_us is not None and t > until_us):
                break
            self.step()
        if until_us is not None and not self._stopped and until_us > self.now_us:
            self.now_us = until_us

    def run_ms(self, until_ms: float) -> None:
        self.run(ms_to_us(until_ms))
