"""Agent heartbeats, metadata service and the discoverer state machine.

The transition functions are pure: they take a record and an input and return
the new record plus a tuple of actions for the caller to carry out. The
``AgentStatusProvider`` and ``AgentDiscoverer`` classes wire them to the bus.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional, Union

from .fqn import FqnTuple, Resource, ResourceKind, Scope, SegmentValue, build_fqn, DdsKind, to_dds_name
from .sim.bus import Bus, Envelope, Participant, QoS, ServiceClient, ServiceServer
from .sim.engine import Simulator

log = logging.getLogger(__name__)

HEARTBEAT_BYTES = 64
METADATA_BASE_BYTES = 256
METADATA_STREAM_BYTES = 64
REQUEST_BYTES = 64
EVENT_BYTES = 128


class Phase(enum.Enum):
    STARTUP = "startup"
    STEADY = "steady"


class AgentState(enum.Enum):
    UNKNOWN = "unknown"
    METADATA_PENDING = "metadata_pending"
    ACTIVE = "active"
    LOST = "lost"


class DiscoveryKind(enum.Enum):
    DISCOVERED = "discovered"
    REDISCOVERED = "rediscovered"
    LOST = "lost"


class StaleResponse(Exception):
    """Raised only in strict mode; normally a stale reply is silently ignored."""


@dataclass(frozen=True)
class LifecycleParams:
    startup_interval_ms: float = 1000.0
    steady_interval_ms: float = 5000.0
    startup_duration_ms: float = 10_000.0
    liveness_timeout_ms: float = 15_000.0
    metadata_timeout_ms: float = 1000.0
    max_retries: int = 3
    backoff_base_ms: float = 500.0
    liveness_check_ms: float = 1000.0


def heartbeat_interval(phase: Phase, params: LifecycleParams = LifecycleParams()) -> float:
    return params.startup_interval_ms if phase is Phase.STARTUP else params.steady_interval_ms


def phase_at(uptime_ms: float, params: LifecycleParams = LifecycleParams()) -> Phase:
    return Phase.STARTUP if uptime_ms < params.startup_duration_ms else Phase.STEADY


# -- messages ----------------------------------------------------------------------

@dataclass(frozen=True)
class AgentHeartbeat:
    agent: str
    sent_at_ms: float
    incarnation: int = 0

    def __post_init__(self) -> None:
        if self.incarnation < 0:
            raise ValueError("incarnation must be >= 0")


@dataclass(frozen=True)
class StreamDescriptor:
    component: str
    stream: str
    codec: str
    compressed_topic: str
    decoded_topic: str
    info_topic: str
    relayed_info_topic: str

    @property
    def key(self) -> tuple[str, str]:
        return (self.component, self.stream)


def describe_stream(agent: str, component: str, stream: str, codec: str) -> StreamDescriptor:
    """Topic names for one camera stream of ``agent``: global compressed side, local decoded side."""
    ag = SegmentValue.from_text(agent)
    comp = SegmentValue.from_text(component)
    st = SegmentValue.from_text(stream)

    def name(scope: Scope, resource: SegmentValue) -> str:
        return build_fqn(FqnTuple(scope, resource, ag, comp, st).canonical())

    return StreamDescriptor(
        component=component,
        stream=stream,
        codec=codec,
        compressed_topic=name(Scope.GLOBAL, SegmentValue(Resource.IMAGE, codec)),
        decoded_topic=name(Scope.LOCAL, SegmentValue(Resource.IMAGE)),
        info_topic=name(Scope.GLOBAL, SegmentValue(Resource.CAMERA_INFO)),
        relayed_info_topic=name(Scope.LOCAL, SegmentValue(Resource.CAMERA_INFO)),
    )


@dataclass(frozen=True)
class AgentMetadata:
    agent: str
    streams: tuple[StreamDescriptor, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "streams", tuple(self.streams))
        for s in self.streams:
            if not s.compressed_topic.startswith("/global/") or not s.decoded_topic.startswith("/local/"):
                raise ValueError(f"stream {s.key} must publish compressed globally and decode locally")

    @property
    def wire_bytes(self) -> int:
        return METADATA_BASE_BYTES + METADATA_STREAM_BYTES * len(self.streams)


@dataclass(frozen=True)
class DiscoveryEvent:
    kind: DiscoveryKind
    agent: str
    metadata: Optional[AgentMetadata] = None
    time_ms: float = 0.0

    def __post_init__(self) -> None:
        if self.kind is not DiscoveryKind.LOST and self.metadata is None:
            raise ValueError(f"{self.kind.value} events carry metadata")


# -- state machine -------------------------------------------------------------------

@dataclass(frozen=True)
class SendQuery:
    query_id: int
    delay_ms: float = 0.0


@dataclass(frozen=True)
class EmitEvent:
    event: DiscoveryEvent


Action = Union[SendQuery, EmitEvent]


@dataclass(frozen=True)
class AgentRecord:
    agent: str
    state: AgentState = AgentState.UNKNOWN
    last_heartbeat_ms: Optional[float] = None
    cached_metadata: Optional[AgentMetadata] = None
    cached_incarnation: Optional[int] = None
    pending_incarnation: Optional[int] = None
    inflight_query: Optional[int] = None
    retry_count: int = 0
    next_query_id: int = 1

    def check(self) -> None:
        if (self.inflight_query is not None) != (self.state is AgentState.METADATA_PENDING):
            raise AssertionError(f"in-flight query without pending state: {self}")
        if self.cached_metadata is not None and self.state not in (AgentState.ACTIVE, AgentState.LOST):
            raise AssertionError(f"cached metadata outside active/lost: {self}")


def _query(record: AgentRecord, incarnation: Optional[int], now: float, delay: float = 0.0,
           retry: int = 0) -> tuple[AgentRecord, tuple[Action, ...]]:
    qid = record.next_query_id
    rec = replace(
        record,
        state=AgentState.METADATA_PENDING,
        cached_metadata=None,
        cached_incarnation=None,
        pending_incarnation=incarnation,
        inflight_query=qid,
        retry_count=retry,
        next_query_id=qid + 1,
    )
    return rec, (SendQuery(qid, delay),)


def on_heartbeat(record: AgentRecord, hb: AgentHeartbeat, now: float) -> tuple[AgentRecord, tuple[Action, ...]]:
    if hb.agent != record.agent:
        raise ValueError(f"heartbeat from {hb.agent!r} applied to record of {record.agent!r}")
    rec = replace(record, last_heartbeat_ms=now)
    state = record.state
    if state is AgentState.UNKNOWN:
        return _query(rec, hb.incarnation, now)
    if state is AgentState.LOST:
        if record.cached_incarnation == hb.incarnation and record.cached_metadata is not None:
            event = DiscoveryEvent(DiscoveryKind.REDISCOVERED, record.agent, record.cached_metadata, now)
            return replace(rec, state=AgentState.ACTIVE), (EmitEvent(event),)
        return _query(rec, hb.incarnation, now)
    # pending: the query already in flight covers it; active: refresh only
    return rec, ()


def on_metadata_response(record: AgentRecord, query_id: int, metadata: AgentMetadata, incarnation: int,
                         now: float, strict: bool = False) -> tuple[AgentRecord, tuple[Action, ...]]:
    if record.state is not AgentState.METADATA_PENDING or query_id != record.inflight_query:
        if strict:
            raise StaleResponse(f"query {query_id} for {record.agent!r} is not in flight")
        return record, ()
    rec = replace(
        record,
        state=AgentState.ACTIVE,
        cached_metadata=metadata,
        cached_incarnation=incarnation,
        pending_incarnation=None,
        inflight_query=None,
        retry_count=0,
    )
    return rec, (EmitEvent(DiscoveryEvent(DiscoveryKind.DISCOVERED, record.agent, metadata, now)),)


def on_metadata_timeout(record: AgentRecord, query_id: int, now: float,
                        params: LifecycleParams = LifecycleParams()) -> tuple[AgentRecord, tuple[Action, ...]]:
    if record.state is not AgentState.METADATA_PENDING or query_id != record.inflight_query:
        return record, ()
    if record.retry_count < params.max_retries:
        delay = params.backoff_base_ms * (2 ** record.retry_count)
        return _query(record, record.pending_incarnation, now, delay, record.retry_count + 1)
    return replace(record, state=AgentState.UNKNOWN, inflight_query=None, pending_incarnation=None,
                   retry_count=0), ()


def liveness_check(record: AgentRecord, now: float,
                   params: LifecycleParams = LifecycleParams()) -> tuple[AgentRecord, tuple[Action, ...]]:
    if record.state is AgentState.ACTIVE and now - record.last_heartbeat_ms > params.liveness_timeout_ms:
        return replace(record, state=AgentState.LOST), (EmitEvent(DiscoveryEvent(DiscoveryKind.LOST, record.agent,
                                                                                 None, now)),)
    return record, ()


# -- bus nodes ---------------------------------------------------------------------

HEARTBEAT_TOPIC = build_fqn(FqnTuple(Scope.GLOBAL, SegmentValue(Resource.AGENT_HEARTBEAT)))


def metadata_service(agent: str) -> str:
    return build_fqn(FqnTuple(Scope.GLOBAL, SegmentValue(Resource.GET_METADATA), SegmentValue.from_text(agent),
                              resource_kind=ResourceKind.SERVICE))


def discovery_event_topic(agent: str) -> str:
    return build_fqn(FqnTuple(Scope.LOCAL, SegmentValue(Resource.AGENT_DISCOVERY_EVENT), SegmentValue.from_text(agent)))


def service_names(agent: str) -> tuple[str, str]:
    svc = metadata_service(agent)
    return to_dds_name(svc, DdsKind.SERVICE_REQUEST), to_dds_name(svc, DdsKind.SERVICE_REPLY)


class AgentStatusProvider:
    """Broadcasts heartbeats and answers metadata queries for one agent."""

    def __init__(self, bus: Bus, participant: Participant, metadata: AgentMetadata, incarnation: int = 0,
                 params: LifecycleParams = LifecycleParams()):
        self.bus = bus
        self.sim: Simulator = bus.sim
        self.participant = participant
        self.metadata = metadata
        self.incarnation = incarnation
        self.params = params
        self.started_us: Optional[int] = None
        self.sent = 0
        self._timer: Optional[int] = None
        self._pub = bus.publisher(participant, to_dds_name(HEARTBEAT_TOPIC), QoS.BEST_EFFORT)
        rq, rr = service_names(metadata.agent)
        self._server = ServiceServer(bus, participant, rq, rr, self._serve)

    def _serve(self, _payload) -> tuple[tuple[AgentMetadata, int], int]:
        return (self.metadata, self.incarnation), self.metadata.wire_bytes

    def start(self) -> None:
        self.started_us = self.sim.now_us
        self._beat()

    def stop(self) -> None:
        if self._timer is not None:
            self.sim.cancel(self._timer)
            self._timer = None

    def uptime_ms(self) -> float:
        return 0.0 if self.started_us is None else (self.sim.now_us - self.started_us) / 1000.0

    def _beat(self) -> None:
        hb = AgentHeartbeat(self.metadata.agent, self.sim.now_ms, self.incarnation)
        self.bus.publish(self._pub, HEARTBEAT_BYTES, hb)
        self.sent += 1
        interval = heartbeat_interval(phase_at(self.uptime_ms(), self.params), self.params)
        self._timer = self.sim.schedule(interval, self._beat)


class AgentDiscoverer:
    """Tracks remote agents from heartbeats and publishes discovery events locally."""

    def __init__(self, bus: Bus, participant: Participant, agent: str,
                 params: LifecycleParams = LifecycleParams(),
                 on_event: Optional[Callable[[DiscoveryEvent], None]] = None):
        self.bus = bus
        self.sim: Simulator = bus.sim
        self.participant = participant
        self.agent = agent
        self.params = params
        self.on_event = on_event
        self.records: dict[str, AgentRecord] = {}
        self.events: list[DiscoveryEvent] = []
        self.queries_sent = 0
        self._clients: dict[str, ServiceClient] = {}
        self._running = False
        self._hb_sub = None
        self._event_pub = bus.publisher(participant, to_dds_name(discovery_event_topic(agent)), QoS.RELIABLE)

    def start(self) -> None:
        self._running = True
        self._hb_sub = self.bus.subscriber(self.participant, to_dds_name(HEARTBEAT_TOPIC), self._on_heartbeat,
                                           QoS.BEST_EFFORT)
        self.sim.schedule(self.params.liveness_check_ms, self._liveness)

    def stop(self) -> None:
        self._running = False
        if self._hb_sub is not None:
            self.bus.remove_endpoint(self._hb_sub)
        for c in self._clients.values():
            c.close()

    def state_of(self, agent: str) -> AgentState:
        rec = self.records.get(agent)
        return rec.state if rec else AgentState.UNKNOWN

    def active_agents(self) -> list[str]:
        return sorted(a for a, r in self.records.items() if r.state is AgentState.ACTIVE)

    def _apply(self, agent: str, result: tuple[AgentRecord, tuple[Action, ...]]) -> None:
        rec, actions = result
        self.records[agent] = rec
        for action in actions:
            if isinstance(action, SendQuery):
                self.sim.schedule(action.delay_ms, self._send_query, agent, action.query_id)
            else:
                self._emit(action.event)

    def _emit(self, event: DiscoveryEvent) -> None:
        self.events.append(event)
        self.bus.publish(self._event_pub, EVENT_BYTES, event)
        if self.on_event is not None:
            self.on_event(event)

    def _client(self, agent: str) -> ServiceClient:
        if agent not in self._clients:
            rq, rr = service_names(agent)
            self._clients[agent] = ServiceClient(
                self.bus, self.participant, rq, rr,
                lambda qid, payload, a=agent: self._on_reply(a, qid, payload),
                client_name=f"{self.agent}.discoverer",
            )
        return self._clients[agent]

    def _send_query(self, agent: str, query_id: int) -> None:
        rec = self.records.get(agent)
        if not self._running or rec is None or rec.inflight_query != query_id:
            return
        self.queries_sent += 1
        self._client(agent).call(query_id, None, REQUEST_BYTES)
        self.sim.schedule(self.params.metadata_timeout_ms, self._on_timeout, agent, query_id)

    def _on_heartbeat(self, env: Envelope) -> None:
        hb: AgentHeartbeat = env.data
        if not self._running or hb.agent == self.agent:
            return
        rec = self.records.get(hb.agent) or AgentRecord(hb.agent)
        self._apply(hb.agent, on_heartbeat(rec, hb, self.sim.now_ms))

    def _on_reply(self, agent: str, query_id: int, payload) -> None:
        if not self._running:
            return
        metadata, incarnation = payload
        self._apply(agent, on_metadata_response(self.records[agent], query_id, metadata, incarnation,
                                                self.sim.now_ms))

    def _on_timeout(self, agent: str, query_id: int) -> None:
        if self._running:
            self._apply(agent, on_metadata_timeout(self.records[agent], query_id, self.sim.now_ms, self.params))

    def _liveness(self) -> None:
        if not self._running:
            return
        now = self.sim.now_ms
        for agent in sorted(self.records):
            self._apply(agent, liveness_check(self.records[agent], now, self.params))
        self.sim.schedule(self.params.liveness_check_ms, self._liveness)


def replay(record: AgentRecord, inputs: Iterable[tuple], params: LifecycleParams = LifecycleParams()):
    """Drive the state machine with ``(kind, time, ...)`` tuples; yields ``(record, actions)`` per step.

    Kinds: ``("hb", t, incarnation)``, ``("reply", t, query_id, metadata, incarnation)``,
    ``("timeout", t, query_id)``, ``("tick", t)``.
    """
    for item in inputs:
        kind, t = item[0], item[1]
        if kind == "hb":
            record, actions = on_heartbeat(record, AgentHeartbeat(record.agent, t, item[2]), t)
        elif kind == "reply":
            record, actions = on_metadata_response(record, item[2], item[3], item[4], t)
        elif kind == "timeout":
            record, actions = on_metadata_timeout(record, item[2], t, params)
        elif kind == "tick":
            record, actions = liveness_check(record, t, params)
        else:
            raise ValueError(f"unknown input {kind!r}")
        yield record, actions
