"""Baseline decentralized discovery: every participant announces every endpoint to every peer.

Announcements are modelled in batches. Each receiver works through arrivals
in FIFO order; the first copy of an endpoint costs ``process_new_ms``, any
repeat ``process_dup_ms``. An endpoint counts as acknowledged once the sender
could have heard about its processing (processing time plus one link
latency). Unacknowledged endpoints are re-announced on a jittered period, so
a backlogged receiver keeps attracting repeats: the storm grows with the
number of peer pairs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .engine import Simulator, ms_to_us

_NEVER = np.iinfo(np.int64).max // 4


@dataclass(frozen=True)
class MulticastParams:
    announce_size: int = 300
    initial_copies: int = 3
    resend_period_ms: float = 1000.0
    resend_jitter: float = 0.1
    endpoints_per_node: int = 16
    process_new_ms: float = 2.5
    process_dup_ms: float = 0.05
    launch_min_ms: float = 200.0
    launch_max_ms: float = 800.0
    latency_ms: float = 1.0

    def __post_init__(self) -> None:
        if self.announce_size <= 0 or self.initial_copies < 1 or self.endpoints_per_node < 1:
            raise ValueError("announcement size, copies and endpoints per node must be positive")
        if not 0 <= self.resend_jitter < 1 or self.resend_period_ms <= 0:
            raise ValueError("resend period must be positive with jitter in [0, 1)")
        if not 0 <= self.launch_min_ms <= self.launch_max_ms:
            raise ValueError("launch window must satisfy 0 <= min <= max")


@dataclass(frozen=True)
class DiscoveryResult:
    agent: str
    discovery_time_ms: float
    ingress_bytes: int


class _Fleet:
    def __init__(self, sim: Simulator, names: Sequence[str], endpoints: int, params: MulticastParams):
        self.sim = sim
        self.names = list(names)
        self.n = len(names)
        self.e = endpoints
        self.p = params
        self.latency = ms_to_us(params.latency_ms)
        self.new_us = ms_to_us(params.process_new_ms)
        self.dup_us = ms_to_us(params.process_dup_ms)
        self.all_endpoints = np.arange(endpoints)
        self.launched = [False] * self.n
        self.contacted: set[tuple[int, int]] = set()
        # processed[r][s][k]: when receiver r first processed endpoint k of sender s
        self.processed = [[np.full(endpoints, _NEVER, dtype=np.int64) for _ in range(self.n)] for _ in range(self.n)]
        self.free_at = [0] * self.n
        self.arrivals: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]

    def launch(self, i: int) -> None:
        self.launched[i] = True
        for j in range(self.n):
            if j != i and self.launched[j]:
                self._contact(i, j)

    def _contact(self, s: int, r: int) -> None:
        self.contacted.add((s, r))
        self._send(s, r, self.all_endpoints, self.p.initial_copies)
        self.sim.schedule_us(self._period(), self._resend, s, r)

    def _period(self) -> int:
        p = self.p
        factor = 1.0 + p.resend_jitter * (2.0 * self.sim.rng.random() - 1.0)
        return ms_to_us(p.resend_period_ms * factor)

    def _send(self, s: int, r: int, endpoints: np.ndarray, copies: int) -> None:
        self.sim.schedule_us(self.latency, self._arrive, r, s, endpoints, copies)

    def _arrive(self, r: int, s: int, endpoints: np.ndarray, copies: int) -> None:
        now = self.sim.now_us
        self.arrivals[r].append((now, len(endpoints) * copies * self.p.announce_size))
        if (r, s) not in self.contacted:
            self._contact(r, s)
        seen = self.processed[r][s]
        fresh = seen[endpoints] == _NEVER
        costs = np.where(fresh, self.new_us, self.dup_us)
        ends = max(now, self.free_at[r]) + np.cumsum(costs)
        seen[endpoints[fresh]] = ends[fresh]
        self.free_at[r] = int(ends[-1]) + (copies - 1) * len(endpoints) * self.dup_us

    def _resend(self, s: int, r: int) -> None:
        now = self.sim.now_us
        unacked = np.flatnonzero(self.processed[r][s] > now - self.latency)
        if len(unacked) == 0:
            return
        self._send(s, r, unacked, 1)
        self.sim.schedule_us(self._period(), self._resend, s, r)

    def completion_us(self, r: int) -> int:
        return max(int(self.processed[r][s].max()) for s in range(self.n) if s != r)


def run_baseline_discovery(sim: Simulator, n_agents: int, nodes_per_agent: int,
                           params: MulticastParams = MulticastParams(),
                           names: Optional[Sequence[str]] = None) -> dict[str, DiscoveryResult]:
    """Discovery time and ingress bytes per agent after a simultaneous start signal at t=0.

    Ingress counts announcements that arrived by the time the whole fleet had
    resolved every remote endpoint.
    """
    if n_agents < 1 or nodes_per_agent < 1:
        raise ValueError("need at least one agent and one node per agent")
    names = list(names) if names is not None else [f"agent{i + 1}" for i in range(n_agents)]
    if len(names) != n_agents or len(set(names)) != n_agents:
        raise ValueError("agent names must be unique, one per agent")
    if n_agents == 1:
        return {names[0]: DiscoveryResult(names[0], 0.0, 0)}
    fleet = _Fleet(sim, names, nodes_per_agent * params.endpoints_per_node, params)
    start = sim.now_us
    for i in range(n_agents):
        delay = sim.rng.uniform(params.launch_min_ms, params.launch_max_ms)
        sim.schedule(delay, fleet.launch, i)
    sim.run()
    done = [fleet.completion_us(r) for r in range(n_agents)]
    window = max(done)
    return {
        names[r]: DiscoveryResult(
            names[r],
            (done[r] - start) / 1000.0,
            sum(b for t, b in fleet.arrivals[r] if t <= window),
        )
        for r in range(n_agents)
    }
