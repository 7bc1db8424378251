"""On-demand decoding proxy for remote compressed streams.

One decode/relay component per (agent, component, stream), alive exactly while
some local process subscribes to the decoded image or the relayed camera info.
"""
from __future__ import annotations

import enum
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .codecs.blob import Codec, CompressedBlob
from .codecs.cost import CpuMeter
from .codecs.errors import CorruptStream
from .codecs.rvl import rvl_decompress
from .fqn import to_dds_name
from .lifecycle import AgentMetadata, DiscoveryEvent, DiscoveryKind, StreamDescriptor, discovery_event_topic
from .sim.bus import Bus, Endpoint, Envelope, GraphEvent, GraphEventKind, Participant, QoS

log = logging.getLogger(__name__)

StreamKey = tuple[str, str, str]  # (agent, component, stream)


class UnknownTopic(LookupError):
    pass


class ComponentState(enum.Enum):
    UNLOADED = "unloaded"
    LOADING = "loading"
    LOADED = "loaded"


@dataclass
class DecoderComponent:
    agent: str
    descriptor: StreamDescriptor
    state: ComponentState = ComponentState.LOADING
    refcount: int = 0
    load_delay_ms: float = 525.0

    @property
    def key(self) -> StreamKey:
        return (self.agent, self.descriptor.component, self.descriptor.stream)


@dataclass(frozen=True)
class Load:
    key: StreamKey
    delay_ms: float


@dataclass(frozen=True)
class CancelLoad:
    key: StreamKey


@dataclass(frozen=True)
class Unload:
    key: StreamKey


ProxyAction = Union[Load, CancelLoad, Unload]


class AgentDecoder:
    """Reference counting over graph events; no I/O of its own.

    Demand is counted per DDS topic name even before the owning agent is
    known, so a subscriber that appears early is honoured at discovery.
    """

    def __init__(self, load_delay_ms: float = 525.0):
        self.load_delay_ms = load_delay_ms
        self.metadata: dict[str, AgentMetadata] = {}
        self.active: set[str] = set()
        self.components: dict[StreamKey, DecoderComponent] = {}
        self.demand: Counter = Counter()
        self._by_topic: dict[str, StreamKey] = {}
        self._descriptors: dict[StreamKey, StreamDescriptor] = {}

    def refcount(self, key: StreamKey) -> int:
        d = self._descriptors[key]
        return self.demand[to_dds_name(d.decoded_topic)] + self.demand[to_dds_name(d.relayed_info_topic)]

    def decoded_subscribers(self, key: StreamKey) -> int:
        return self.demand[to_dds_name(self._descriptors[key].decoded_topic)]

    def key_for_topic(self, dds_name: str) -> StreamKey:
        try:
            return self._by_topic[dds_name]
        except KeyError:
            raise UnknownTopic(dds_name) from None

    def _maybe_load(self, key: StreamKey) -> list[ProxyAction]:
        agent = key[0]
        if agent not in self.active or key in self.components or self.refcount(key) == 0:
            return []
        self.components[key] = DecoderComponent(agent, self._descriptors[key], ComponentState.LOADING,
                                                self.refcount(key), self.load_delay_ms)
        return [Load(key, self.load_delay_ms)]

    def _drop(self, key: StreamKey) -> list[ProxyAction]:
        comp = self.components.pop(key, None)
        if comp is None:
            return []
        if comp.state is ComponentState.LOADING:
            return [CancelLoad(key)]
        comp.state = ComponentState.UNLOADED
        return [Unload(key)]

    def on_discovery_event(self, event: DiscoveryEvent) -> list[ProxyAction]:
        agent = event.agent
        if event.kind is DiscoveryKind.LOST:
            self.active.discard(agent)
            actions: list[ProxyAction] = []
            for key in sorted(k for k in self.components if k[0] == agent):
                actions += self._drop(key)
            return actions
        self.metadata[agent] = event.metadata
        self.active.add(agent)
        for key in [k for k in self._descriptors if k[0] == agent]:
            d = self._descriptors.pop(key)
            self._by_topic.pop(to_dds_name(d.decoded_topic), None)
            self._by_topic.pop(to_dds_name(d.relayed_info_topic), None)
        for d in event.metadata.streams:
            key = (agent, d.component, d.stream)
            self._descriptors[key] = d
            self._by_topic[to_dds_name(d.decoded_topic)] = key
            self._by_topic[to_dds_name(d.relayed_info_topic)] = key
        actions = []
        for key in sorted(k for k in self._descriptors if k[0] == agent):
            actions += self._maybe_load(key)
        return actions

    def on_graph_event(self, kind: GraphEventKind, dds_name: str) -> list[ProxyAction]:
        if kind is GraphEventKind.SUBSCRIPTION_CREATED:
            self.demand[dds_name] += 1
        elif self.demand[dds_name] > 0:
            self.demand[dds_name] -= 1
        key = self._by_topic.get(dds_name)
        if key is None:
            log.debug("ignoring graph event on unknown topic %s", dds_name)
            return []
        comp = self.components.get(key)
        if comp is not None:
            comp.refcount = self.refcount(key)
            if comp.refcount == 0:
                return self._drop(key)
            return []
        return self._maybe_load(key)

    def on_load_complete(self, key: StreamKey) -> bool:
        comp = self.components.get(key)
        if comp is None or comp.state is not ComponentState.LOADING:
            return False
        comp.state = ComponentState.LOADED
        return True


def pipeline_tick(proxy: AgentDecoder, key: StreamKey, blob: CompressedBlob, meter: CpuMeter):
    """Decode once and fan out to local subscribers; returns the decoded frame or None."""
    comp = proxy.components.get(key)
    if comp is None or comp.state is not ComponentState.LOADED:
        return None
    meter.charge("net")
    frame = True
    if blob.codec is Codec.RVL:
        try:
            frame = rvl_decompress(blob)
        except CorruptStream:
            log.warning("dropping corrupt frame %d of %s", blob.frame_index, key)
            return None
    meter.charge("dec")
    meter.charge("ipc", proxy.decoded_subscribers(key))
    return frame


def raw_frame_bytes(blob: CompressedBlob) -> int:
    per_pixel = 2 if blob.codec is Codec.RVL else 3
    return blob.width * blob.height * per_pixel


class DecoderNode:
    """Runs an AgentDecoder inside one device's local domain."""

    def __init__(self, bus: Bus, participant: Participant, agent: str, meter: CpuMeter,
                 load_delay_ms: float = 525.0, decode_ms: float = 0.0, relay_hop_ms: float = 0.0,
                 gop_aligned_start: bool = False, listen_events: bool = True):
        self.bus = bus
        self.sim = bus.sim
        self.participant = participant
        self.agent = agent
        self.meter = meter
        self.proxy = AgentDecoder(load_delay_ms)
        self.decode_ms = decode_ms
        self.relay_hop_ms = relay_hop_ms
        self.gop_aligned_start = gop_aligned_start
        self.decoded = 0
        self._pending: dict[StreamKey, int] = {}
        self._endpoints: dict[StreamKey, list[Endpoint]] = {}
        self._outputs: dict[StreamKey, tuple[Endpoint, Endpoint]] = {}
        self._synced: set[StreamKey] = set()
        bus.on_graph_event(participant.domain, self._on_graph)
        if listen_events:
            bus.subscriber(participant, to_dds_name(discovery_event_topic(agent)),
                           lambda env: self.handle_discovery(env.data), QoS.RELIABLE, matching_delay_ms=0)

    def handle_discovery(self, event: DiscoveryEvent) -> None:
        self._run(self.proxy.on_discovery_event(event))

    def _on_graph(self, event: GraphEvent) -> None:
        if event.participant == self.participant.name:
            return
        self._run(self.proxy.on_graph_event(event.kind, event.name))

    def _run(self, actions: list[ProxyAction]) -> None:
        for action in actions:
            if isinstance(action, Load):
                self._pending[action.key] = self.sim.schedule(action.delay_ms, self._loaded, action.key)
            elif isinstance(action, CancelLoad):
                self.sim.cancel(self._pending.pop(action.key))
            else:
                self._teardown(action.key)

    def _loaded(self, key: StreamKey) -> None:
        self._pending.pop(key, None)
        if not self.proxy.on_load_complete(key):
            return
        d = self.proxy.components[key].descriptor
        p, bus = self.participant, self.bus
        # components join an already matched container, so their endpoints go live at once
        image_out = bus.publisher(p, to_dds_name(d.decoded_topic), QoS.BEST_EFFORT)
        info_out = bus.publisher(p, to_dds_name(d.relayed_info_topic), QoS.RELIABLE)
        self._outputs[key] = (image_out, info_out)
        self._endpoints[key] = [
            bus.subscriber(p, to_dds_name(d.compressed_topic), lambda env, k=key: self._on_blob(k, env),
                           QoS.BEST_EFFORT, matching_delay_ms=0),
            bus.subscriber(p, to_dds_name(d.info_topic), lambda env, k=key: self._on_info(k, env),
                           QoS.BEST_EFFORT, matching_delay_ms=0),
            image_out,
            info_out,
        ]

    def _teardown(self, key: StreamKey) -> None:
        for ep in self._endpoints.pop(key, ()):
            self.bus.remove_endpoint(ep)
        self._outputs.pop(key, None)
        self._synced.discard(key)

    def _on_blob(self, key: StreamKey, env: Envelope) -> None:
        blob: CompressedBlob = env.data
        if self.gop_aligned_start and key not in self._synced:
            if not blob.keyframe:
                return
            self._synced.add(key)
        frame = pipeline_tick(self.proxy, key, blob, self.meter)
        if frame is None:
            return
        self.decoded += 1
        self.sim.schedule(self.decode_ms + self.relay_hop_ms, self._republish, key, env, raw_frame_bytes(blob))

    def _republish(self, key: StreamKey, env: Envelope, nbytes: int) -> None:
        out = self._outputs.get(key)
        if out is not None:
            self.bus.publish(out[0], nbytes, env)

    def _on_info(self, key: StreamKey, env: Envelope) -> None:
        out = self._outputs.get(key)
        if out is not None:
            self.bus.publish(out[1], env.payload_bytes, env.data)


class DecodingSubscriber:
    """A baseline subscriber that receives and decodes its own copy of a compressed stream."""

    def __init__(self, bus: Bus, participant: Participant, topic: str, meter: CpuMeter,
                 decode_ms: float = 0.0, on_frame: Optional[Callable[[Envelope], None]] = None,
                 matching_delay_ms: Optional[float] = None):
        self.bus = bus
        self.meter = meter
        self.decode_ms = decode_ms
        self.on_frame = on_frame
        self.received = 0
        self.endpoint = bus.subscriber(participant, topic, self._on_blob, QoS.BEST_EFFORT, matching_delay_ms)

    def _on_blob(self, env: Envelope) -> None:
        blob: CompressedBlob = env.data
        self.meter.charge("net")
        if blob.codec is Codec.RVL:
            try:
                rvl_decompress(blob)
            except CorruptStream:
                return
        self.meter.charge("dec")
        self.received += 1
        if self.on_frame is not None:
            self.bus.sim.schedule(self.decode_ms, self.on_frame, env)

    def close(self) -> None:
        self.bus.remove_endpoint(self.endpoint)
