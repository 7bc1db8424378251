"""Domained publish/subscribe transport on top of the event loop.

Fan-out is resolved when a message is published: the bus walks the origin
domain, then every domain reachable through routers that currently have
demand, and schedules one delivery event per distinct arrival time. A hop
between two devices is network traffic; a hop inside a device is local IPC.

Echo suppression is a (origin participant, sequence, domain) visit set, so a
message enters each domain at most once however many routers share domain 0.
"""
from __future__ import annotations

import enum
import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Optional

from ..router import GLOBAL_DOMAIN, Direction, RouterConfig, RouterError, TfMessage, rewrite_tf_frames
from .engine import Simulator, ms_to_us


class BusError(ValueError):
    pass


class EndpointKind(enum.Enum):
    PUBLISHER = "publisher"
    SUBSCRIBER = "subscriber"


class QoS(enum.Enum):
    BEST_EFFORT = "best_effort"
    RELIABLE = "reliable"


def qos_compatible(publisher: QoS, subscriber: QoS) -> bool:
    """A reliable reader needs a reliable writer; a best-effort reader takes either."""
    return subscriber is QoS.BEST_EFFORT or publisher is QoS.RELIABLE


@dataclass(frozen=True)
class Envelope:
    name: str
    domain: int
    origin: int
    payload_bytes: int
    publish_time_us: int
    seq: int
    data: Any = None

    def __post_init__(self) -> None:
        if self.payload_bytes < 0:
            raise BusError("payload size must be >= 0")

    @property
    def publish_time_ms(self) -> float:
        return self.publish_time_us / 1000.0


@dataclass(frozen=True)
class LinkModel:
    base_latency_ms: float = 1.0
    local_latency_ms: float = 0.0
    per_message_overhead_bytes: int = 50
    loss_probability: float = 0.0

    def __post_init__(self) -> None:
        if self.base_latency_ms < 0 or self.local_latency_ms < 0:
            raise BusError("latencies must be >= 0")
        if self.per_message_overhead_bytes < 0:
            raise BusError("overhead must be >= 0")
        if not 0.0 <= self.loss_probability <= 1.0:
            raise BusError("loss probability must be in [0, 1]")


@dataclass(eq=False)
class Participant:
    pid: int
    name: str
    agent: str
    domain: int
    endpoints: list["Endpoint"] = field(default_factory=list)

    def __repr__(self) -> str:
        return f"Participant({self.name!r}, agent={self.agent!r}, domain={self.domain})"


@dataclass(eq=False)
class Endpoint:
    eid: int
    participant: Participant
    kind: EndpointKind
    name: str
    qos: QoS
    callback: Optional[Callable[[Envelope], None]] = None
    active: bool = False
    removed: bool = False

    @property
    def domain(self) -> int:
        return self.participant.domain

    def __repr__(self) -> str:
        return f"Endpoint({self.kind.value} {self.name!r} d{self.domain} #{self.eid})"


class GraphEventKind(enum.Enum):
    SUBSCRIPTION_CREATED = "created"
    SUBSCRIPTION_REMOVED = "removed"


@dataclass(frozen=True)
class GraphEvent:
    kind: GraphEventKind
    name: str
    domain: int
    participant: str
    time_us: int


class TrafficCounter:
    """Per-agent byte tallies.

    Network ingress is also binned per (agent, name) over ``bin_us`` windows
    by arrival time. At quiescence ``sum(ingress) == sum(egress) - lost_bytes``.
    """

    def __init__(self, bin_us: int = 1_000_000):
        self.bin_us = bin_us
        self.ingress: Counter = Counter()
        self.egress: Counter = Counter()
        self.local: Counter = Counter()
        self.topic_ingress: Counter = Counter()
        self.topic_egress: Counter = Counter()
        self.ingress_bins: Counter = Counter()
        self.lost_bytes = 0
        self.lost_messages = 0
        self.messages = 0

    def record_send(self, agent: str, name: str, nbytes: int) -> None:
        self.egress[agent] += nbytes
        self.topic_egress[(agent, name)] += nbytes
        self.messages += 1

    def record_receive(self, agent: str, name: str, nbytes: int, time_us: int) -> None:
        self.ingress[agent] += nbytes
        self.topic_ingress[(agent, name)] += nbytes
        self.ingress_bins[(agent, name, time_us // self.bin_us)] += nbytes

    def record_loss(self, nbytes: int) -> None:
        self.lost_bytes += nbytes
        self.lost_messages += 1

    def record_local(self, agent: str, nbytes: int) -> None:
        self.local[agent] += nbytes

    def bin_bytes(self, agent: str, index: int, name: Optional[str] = None) -> int:
        if name is not None:
            return self.ingress_bins[(agent, name, index)]
        return sum(v for (a, _, i), v in self.ingress_bins.items() if a == agent and i == index)

    def total_ingress(self, agents: Optional[Iterable[str]] = None) -> int:
        if agents is None:
            return sum(self.ingress.values())
        return sum(self.ingress[a] for a in agents)

    def conservation_gap(self) -> int:
        return sum(self.egress.values()) - self.lost_bytes - sum(self.ingress.values())


@dataclass(eq=False)
class SimRouter:
    """A bridge process on ``config.agent``'s device between its domain and domain 0."""

    config: RouterConfig
    forwarded: int = 0
    _verdicts: dict = field(default_factory=dict, repr=False)

    def forwards(self, name: str) -> bool:
        verdict = self._verdicts.get(name)
        if verdict is None:
            verdict = self._verdicts[name] = self.config.forwards(name)
        return verdict

    @property
    def agent(self) -> str:
        return self.config.agent

    def other(self, domain: int) -> int:
        if domain == self.config.local_domain:
            return GLOBAL_DOMAIN
        if domain == GLOBAL_DOMAIN:
            return self.config.local_domain
        raise RouterError(f"router for {self.agent!r} does not touch domain {domain}")


# arrival item tags
_DELIVER = 0
_NET = 1
_LOCAL = 2


class Bus:
    def __init__(self, sim: Simulator, link: LinkModel = LinkModel(), matching_delay_ms: float = 0.0):
        self.sim = sim
        self.link = link
        self.matching_delay_ms = matching_delay_ms
        self.traffic = TrafficCounter()
        self.participants: dict[str, Participant] = {}
        self.routers: list[SimRouter] = []
        self._routers_by_domain: dict[int, list[SimRouter]] = defaultdict(list)
        self._subs: dict[tuple[int, str], list[Endpoint]] = defaultdict(list)
        self._graph_listeners: dict[int, list[Callable[[GraphEvent], None]]] = defaultdict(list)
        self._pids = itertools.count(1)
        self._eids = itertools.count(1)
        self._seqs: dict[int, itertools.count] = {}
        self._net_us = ms_to_us(link.base_latency_ms)
        self._local_us = ms_to_us(link.local_latency_ms)

    # -- topology --------------------------------------------------------------

    def add_participant(self, name: str, agent: Optional[str] = None, domain: int = GLOBAL_DOMAIN) -> Participant:
        if name in self.participants:
            raise BusError(f"duplicate participant name {name!r}")
        if domain < 0:
            raise BusError("domain ids are non-negative")
        p = Participant(next(self._pids), name, agent or name, domain)
        self.participants[name] = p
        self._seqs[p.pid] = itertools.count()
        return p

    def remove_participant(self, participant: Participant) -> None:
        for ep in list(participant.endpoints):
            self.remove_endpoint(ep)
        self.participants.pop(participant.name, None)

    def add_router(self, config: RouterConfig) -> SimRouter:
        for r in self.routers:
            if r.config.local_domain == config.local_domain:
                raise BusError(f"domain {config.local_domain} already bridged for {r.agent!r}")
        router = SimRouter(config)
        self.routers.append(router)
        self._routers_by_domain[config.local_domain].append(router)
        self._routers_by_domain[GLOBAL_DOMAIN].append(router)
        return router

    def on_graph_event(self, domain: int, callback: Callable[[GraphEvent], None]) -> None:
        self._graph_listeners[domain].append(callback)

    # -- endpoints -------------------------------------------------------------

    def add_endpoint(self, participant: Participant, kind: EndpointKind, name: str, qos: QoS = QoS.RELIABLE,
                     callback: Optional[Callable[[Envelope], None]] = None,
                     matching_delay_ms: Optional[float] = None) -> Endpoint:
        ep = Endpoint(next(self._eids), participant, kind, name, qos, callback)
        participant.endpoints.append(ep)
        delay = self.matching_delay_ms if matching_delay_ms is None else matching_delay_ms
        if kind is EndpointKind.PUBLISHER or delay <= 0:
            self._register(ep)
        else:
            self.sim.schedule(delay, self._register, ep)
        return ep

    def publisher(self, participant: Participant, name: str, qos: QoS = QoS.RELIABLE) -> Endpoint:
        return self.add_endpoint(participant, EndpointKind.PUBLISHER, name, qos)

    def subscriber(self, participant: Participant, name: str, callback: Optional[Callable[[Envelope], None]] = None,
                   qos: QoS = QoS.BEST_EFFORT, matching_delay_ms: Optional[float] = None) -> Endpoint:
        return self.add_endpoint(participant, EndpointKind.SUBSCRIBER, name, qos, callback, matching_delay_ms)

    def _register(self, ep: Endpoint) -> None:
        if ep.removed or ep.active:
            return
        ep.active = True
        if ep.kind is EndpointKind.SUBSCRIBER:
            self._subs[(ep.domain, ep.name)].append(ep)
            self._emit_graph(GraphEventKind.SUBSCRIPTION_CREATED, ep)

    def remove_endpoint(self, ep: Endpoint) -> None:
        if ep.removed:
            return
        ep.removed = True
        if ep in ep.participant.endpoints:
            ep.participant.endpoints.remove(ep)
        if ep.active:
            ep.active = False
            if ep.kind is EndpointKind.SUBSCRIBER:
                self._subs[(ep.domain, ep.name)].remove(ep)
                self._emit_graph(GraphEventKind.SUBSCRIPTION_REMOVED, ep)

    def _emit_graph(self, kind: GraphEventKind, ep: Endpoint) -> None:
        event = GraphEvent(kind, ep.name, ep.domain, ep.participant.name, self.sim.now_us)
        for listener in list(self._graph_listeners.get(ep.domain, ())):
            listener(event)

    def subscriber_count(self, domain: int, name: str) -> int:
        return len(self._subs.get((domain, name), ()))

    # -- delivery --------------------------------------------------------------

    def _has_demand(self, domain: int, name: str, came_from: Optional[SimRouter], seen: frozenset) -> bool:
        if self._subs.get((domain, name)):
            return True
        for r in self._routers_by_domain.get(domain, ()):
            if r is came_from or not r.forwards(name):
                continue
            other = r.other(domain)
            if other not in seen and self._has_demand(other, name, r, seen | {domain}):
                return True
        return False

    def _hop(self, sender: str, receiver: str, name: str, nbytes: int, t_us: int, best_effort: bool,
             arrivals: dict) -> Optional[int]:
        """Account one hop; returns the arrival time, or None if the message was lost."""
        if sender == receiver:
            arrival = t_us + self._local_us
            arrivals[arrival].append((_LOCAL, receiver, name, nbytes))
            return arrival
        self.traffic.record_send(sender, name, nbytes)
        if best_effort and self.link.loss_probability > 0 and self.sim.rng.random() < self.link.loss_probability:
            self.traffic.record_loss(nbytes)
            return None
        arrival = t_us + self._net_us
        arrivals[arrival].append((_NET, receiver, name, nbytes))
        return arrival

    def publish(self, endpoint: Endpoint, payload_bytes: int, data: Any = None) -> int:
        """Send one message; returns the number of subscriber deliveries scheduled."""
        if endpoint.kind is not EndpointKind.PUBLISHER:
            raise BusError("only publishers can publish")
        if endpoint.removed:
            raise BusError("publisher has been removed")
        p = endpoint.participant
        now = self.sim.now_us
        env = Envelope(endpoint.name, p.domain, p.pid, payload_bytes, now, next(self._seqs[p.pid]), data)
        nbytes = payload_bytes + self.link.per_message_overhead_bytes
        pub_be = endpoint.qos is QoS.BEST_EFFORT
        arrivals: dict[int, list] = defaultdict(list)
        delivered = 0
        visited = {p.domain}
        frontier = [(p.domain, p.agent, now, None, env)]
        while frontier:
            domain, sender, t, via, msg = frontier.pop(0)
            for sub in self._subs.get((domain, endpoint.name), ()):
                if not qos_compatible(endpoint.qos, sub.qos):
                    continue
                best_effort = pub_be or sub.qos is QoS.BEST_EFFORT
                arrival = self._hop(sender, sub.participant.agent, endpoint.name, nbytes, t, best_effort, arrivals)
                if arrival is not None:
                    arrivals[arrival].append((_DELIVER, sub, msg))
                    delivered += 1
            for r in self._routers_by_domain.get(domain, ()):
                if r is via or not r.forwards(endpoint.name):
                    continue
                other = r.other(domain)
                if other in visited or not self._has_demand(other, endpoint.name, r, frozenset(visited)):
                    continue
                visited.add(other)
                arrival = self._hop(sender, r.agent, endpoint.name, nbytes, t, pub_be, arrivals)
                if arrival is None:
                    continue
                r.forwarded += 1
                fwd = msg
                if (other == GLOBAL_DOMAIN and endpoint.name in r.config.tf_topics
                        and isinstance(msg.data, TfMessage)):
                    fwd = replace(msg, data=rewrite_tf_frames(msg.data, r.agent, Direction.OUTBOUND))
                frontier.append((other, r.agent, arrival, r, fwd))
        for t in sorted(arrivals):
            self.sim.at_us(t, self._arrive, arrivals[t])
        return delivered

    def _arrive(self, items: list) -> None:
        now = self.sim.now_us
        for item in items:
            tag = item[0]
            if tag == _NET:
                self.traffic.record_receive(item[1], item[2], item[3], now)
            elif tag == _LOCAL:
                self.traffic.record_local(item[1], item[3])
            else:
                _, sub, msg = item
                if sub.active and sub.callback is not None:
                    sub.callback(msg)


# -- request/reply over the bus ---------------------------------------------------

@dataclass(frozen=True)
class Request:
    client: str
    request_id: int
    payload: Any = None


@dataclass(frozen=True)
class Reply:
    client: str
    request_id: int
    payload: Any = None


class ServiceServer:
    """Answers requests on ``request_name`` by publishing on ``reply_name``.

    ``handler(payload)`` returns ``(reply_payload, reply_bytes)``.
    """

    def __init__(self, bus: Bus, participant: Participant, request_name: str, reply_name: str,
                 handler: Callable[[Any], tuple[Any, int]]):
        self.bus = bus
        self.handler = handler
        self.replies = bus.publisher(participant, reply_name, QoS.RELIABLE)
        self.requests = bus.subscriber(participant, request_name, self._on_request, QoS.RELIABLE)
        self.served = 0

    def _on_request(self, env: Envelope) -> None:
        req: Request = env.data
        payload, nbytes = self.handler(req.payload)
        self.served += 1
        self.bus.publish(self.replies, nbytes, Reply(req.client, req.request_id, payload))

    def close(self) -> None:
        self.bus.remove_endpoint(self.replies)
        self.bus.remove_endpoint(self.requests)


class ServiceClient:
    """Every client of a service sees every reply; replies are filtered by client name."""

    def __init__(self, bus: Bus, participant: Participant, request_name: str, reply_name: str,
                 on_reply: Callable[[int, Any], None], client_name: Optional[str] = None):
        self.bus = bus
        self.name = client_name or participant.name
        self.on_reply = on_reply
        self.requests = bus.publisher(participant, request_name, QoS.RELIABLE)
        self.replies = bus.subscriber(participant, reply_name, self._on_reply, QoS.RELIABLE)

    def call(self, request_id: int, payload: Any = None, nbytes: int = 64) -> int:
        return self.bus.publish(self.requests, nbytes, Request(self.name, request_id, payload))

    def _on_reply(self, env: Envelope) -> None:
        rep: Reply = env.data
        if rep.client == self.name:
            self.on_reply(rep.request_id, rep.payload)

    def close(self) -> None:
        self.bus.remove_endpoint(self.requests)
        self.bus.remove_endpoint(self.replies)
