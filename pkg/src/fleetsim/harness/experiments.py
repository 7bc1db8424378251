"""The three benchmark experiments, each a deterministic function of (scenario, seed)."""
from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, field
from typing import Any, Callable

from ..codecs.cost import CpuMeter
from ..codecs.video import MockVideoEncoder
from ..decoder import DecoderNode, DecodingSubscriber
from ..fqn import to_dds_name
from ..lifecycle import (
    AgentDiscoverer,
    AgentMetadata,
    AgentStatusProvider,
    DiscoveryEvent,
    DiscoveryKind,
    describe_stream,
)
from ..router import GLOBAL_DOMAIN, RouterConfig
from ..sim.bus import Bus, Envelope, LinkModel, QoS
from ..sim.engine import Simulator, ms_to_us
from ..sim.multicast import run_baseline_discovery
from .scenario import AgentSpec, Mode, Scenario

US_PER_S = 1_000_000


@dataclass(frozen=True, order=True)
class MetricsRow:
    t_ms: float
    agent: str
    metric: str
    value: float


@dataclass
class ExperimentResult:
    experiment: str
    modes: tuple[Mode, ...]
    rows: list[MetricsRow] = field(default_factory=list)
    summary: list[dict[str, Any]] = field(default_factory=list)

    def sorted_rows(self) -> list[MetricsRow]:
        return sorted(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_ms", "agent", "metric", "value"])
        for r in self.sorted_rows():
            w.writerow([f"{r.t_ms:.3f}", r.agent, r.metric, f"{r.value:.6f}"])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"experiment": self.experiment, "mode": [m.value for m in self.modes], "rows": self.summary}
        return json.dumps(doc, indent=2, sort_keys=True)

    def summary_for(self, mode: Mode) -> list[dict[str, Any]]:
        return [r for r in self.summary if r["mode"] == mode.value]


def seed_for(seed: int, *parts: Any) -> str:
    """Stable per-run seed; string seeds hash the same way in every process."""
    return ":".join(str(p) for p in (seed, *parts))


def _metadata(spec: AgentSpec) -> AgentMetadata:
    return AgentMetadata(spec.name, tuple(describe_stream(spec.name, c, s, k) for c, s, k in spec.streams))


def _video_stream(spec: AgentSpec):
    for c, s, k in spec.streams:
        if k == "h264":
            return describe_stream(spec.name, c, s, k)
    return describe_stream(spec.name, *spec.streams[0])


def _mean(values: list[float]) -> float:
    return statistics.fmean(values) if values else 0.0


def _pstdev(values: list[float]) -> float:
    return statistics.pstdev(values) if len(values) > 1 else 0.0


# -- E1: subscriber scaling -----------------------------------------------------------

def _e1_once(scenario: Scenario, mode: Mode, n: int, seed: str) -> tuple[list[float], list[float]]:
    """Per-second (cpu_units, bandwidth_bps) samples on the consumer."""
    sim = Simulator(seed)
    bus = Bus(sim, scenario.link)
    producer, consumer = scenario.producer, scenario.consumer
    stream = _video_stream(producer)
    meter = CpuMeter(scenario.cost)
    compressed = to_dds_name(stream.compressed_topic)

    if mode is Mode.BASELINE:
        cam = bus.add_participant(f"{producer.name}.camera", producer.name, GLOBAL_DOMAIN)
        for i in range(n):
            p = bus.add_participant(f"{consumer.name}.sub{i}", consumer.name, GLOBAL_DOMAIN)
            DecodingSubscriber(bus, p, compressed, meter)
    else:
        for spec in (producer, consumer):
            bus.add_router(RouterConfig(spec.domain, spec.name))
        cam = bus.add_participant(f"{producer.name}.camera", producer.name, producer.domain)
        dec = bus.add_participant(f"{consumer.name}.decoder", consumer.name, consumer.domain)
        node = DecoderNode(bus, dec, consumer.name, meter, scenario.e3.load_delay_ms, listen_events=False)
        node.handle_discovery(DiscoveryEvent(DiscoveryKind.DISCOVERED, producer.name, _metadata(producer)))
        for i in range(n):
            p = bus.add_participant(f"{consumer.name}.sub{i}", consumer.name, consumer.domain)
            bus.subscriber(p, to_dds_name(stream.decoded_topic), None, QoS.BEST_EFFORT)

    pub = bus.publisher(cam, compressed, QoS.BEST_EFFORT)
    info_pub = bus.publisher(cam, to_dds_name(stream.info_topic), QoS.RELIABLE)
    encoder = MockVideoEncoder(scenario.video)
    fps = scenario.video.framerate
    warm_bins = -(-ms_to_us(scenario.e1.warmup_ms) // US_PER_S)
    n_bins = warm_bins + scenario.samples
    frames_in_bin = [0] * (n_bins + 1)

    def frame_time(k: int) -> int:
        return int(k * US_PER_S // fps)

    def emit(k: int) -> None:
        blob = encoder.encode()
        frames_in_bin[sim.now_us // US_PER_S] += 1
        bus.publish(pub, blob.nbytes, blob)
        if scenario.e1.camera_info_bytes:
            bus.publish(info_pub, scenario.e1.camera_info_bytes, None)
        nxt = frame_time(k + 1)
        if nxt < n_bins * US_PER_S:
            sim.at_us(nxt, emit, k + 1)

    cpu: list[float] = []
    bw: list[float] = []

    def sample(b: int) -> None:
        # closes bin b-1
        if b > warm_bins:
            cpu.append(meter.units(frames_in_bin[b - 1]))
            bw.append(8.0 * bus.traffic.bin_bytes(consumer.name, b - 1, compressed))
        meter.reset()

    for b in range(1, n_bins + 1):
        sim.at_us(b * US_PER_S, sample, b)
    sim.at_us(0, emit, 0)
    sim.run(n_bins * US_PER_S)
    return cpu, bw


def run_e1(scenario: Scenario, seed: int = 0) -> ExperimentResult:
    res = ExperimentResult("e1", scenario.modes)
    agent = scenario.consumer.name
    warm_s = -(-ms_to_us(scenario.e1.warmup_ms) // US_PER_S)
    for mode in scenario.modes:
        for n in range(scenario.e1.n_min, scenario.e1.n_max + 1):
            cpu_all: list[float] = []
            bw_all: list[float] = []
            for r in range(scenario.seeds):
                cpu, bw = _e1_once(scenario, mode, n, seed_for(seed, "e1", mode.value, n, r))
                tag = f"{mode.value}.n{n:02d}" + (f".r{r}" if scenario.seeds > 1 else "")
                for i, (c, b) in enumerate(zip(cpu, bw)):
                    t_ms = (warm_s + i + 1) * 1000.0
                    res.rows.append(MetricsRow(t_ms, agent, f"{tag}.cpu_units", c))
                    res.rows.append(MetricsRow(t_ms, agent, f"{tag}.bandwidth_bps", b))
                cpu_all += cpu
                bw_all += bw
            res.summary.append({
                "mode": mode.value, "n": n,
                "cpu_units": _mean(cpu_all), "cpu_units_std": _pstdev(cpu_all),
                "bandwidth_bps": _mean(bw_all), "bandwidth_bps_std": _pstdev(bw_all),
                "samples": len(cpu_all),
            })
    return res


# -- E2: discovery scaling --------------------------------------------------------------

def _e2_sfgros_once(scenario: Scenario, n: int, seed: str) -> tuple[float, int]:
    """(fleet discovery time ms, bridged ingress bytes up to that time)."""
    if n == 1:
        return 0.0, 0
    sim = Simulator(seed)
    bus = Bus(sim, scenario.link)
    cfg = scenario.e2
    names = [f"agent{i + 1}" for i in range(n)]
    streams = (("camera", "color", "h264"), ("camera", "depth", "rvl"), ("lidar", "pointcloud", "rvl"))
    remaining = {a: set(names) - {a} for a in names}
    done_at: dict[str, int] = {}

    def on_event(agent: str, event: DiscoveryEvent) -> None:
        if event.kind is DiscoveryKind.DISCOVERED:
            remaining[agent].discard(event.agent)
            if not remaining[agent] and agent not in done_at:
                done_at[agent] = sim.now_us
                if len(done_at) == n:
                    sim.stop()

    def launch(status: AgentStatusProvider, discoverer: AgentDiscoverer) -> None:
        discoverer.start()
        status.start()

    for i, name in enumerate(names, start=1):
        # routers are already up when the start signal fires
        bus.add_router(RouterConfig(i, name))
        for k in range(cfg.nodes_per_agent):
            node = bus.add_participant(f"{name}.node{k}", name, i)
            topic = f"rt/local/{name}/node{k // 2}/data"
            if k % 2 == 0:
                bus.publisher(node, topic)
            else:
                bus.subscriber(node, topic)
        spec = AgentSpec(name, i, cfg.nodes_per_agent,
                         tuple(streams[j] if j < len(streams) else (f"camera_{j}", "color", "h264")
                               for j in range(cfg.streams_per_agent)))
        status = AgentStatusProvider(bus, bus.add_participant(f"{name}.status", name, i), _metadata(spec),
                                     params=scenario.lifecycle)
        disc = AgentDiscoverer(bus, bus.add_participant(f"{name}.discoverer", name, i), name, scenario.lifecycle,
                               on_event=lambda ev, a=name: on_event(a, ev))
        delay = sim.rng.uniform(cfg.multicast.launch_min_ms, cfg.multicast.launch_max_ms)
        sim.schedule(delay, launch, status, disc)
    limit = ms_to_us(scenario.duration_ms if scenario.duration_ms else 120_000.0)
    sim.run(limit)
    if len(done_at) < n:
        raise RuntimeError(f"fleet of {n} did not converge within {limit / 1000:.0f} ms")
    # finish deliveries that land in the same microsecond
    sim.run(sim.now_us)
    return max(done_at.values()) / 1000.0, bus.traffic.total_ingress()


def run_e2(scenario: Scenario, seed: int = 0) -> ExperimentResult:
    res = ExperimentResult("e2", scenario.modes)
    cfg = scenario.e2
    for mode in scenario.modes:
        for n in range(cfg.fleet_min, cfg.fleet_max + 1):
            times: list[float] = []
            traffic: list[float] = []
            for r in range(scenario.seeds):
                for s in range(scenario.samples):
                    run_seed = seed_for(seed, "e2", mode.value, n, r, s)
                    if mode is Mode.BASELINE:
                        out = run_baseline_discovery(Simulator(run_seed), n, cfg.nodes_per_agent, cfg.multicast)
                        t = max(x.discovery_time_ms for x in out.values())
                        b = sum(x.ingress_bytes for x in out.values())
                    else:
                        t, b = _e2_sfgros_once(scenario, n, run_seed)
                    tag = f"{mode.value}.n{n}" + (f".r{r}" if scenario.seeds > 1 else "")
                    res.rows.append(MetricsRow(t, "fleet", f"{tag}.s{s:03d}.discovery_time_ms", t))
                    res.rows.append(MetricsRow(t, "fleet", f"{tag}.s{s:03d}.traffic_bytes", float(b)))
                    times.append(t)
                    traffic.append(float(b))
            res.summary.append({
                "mode": mode.value, "n_agents": n,
                "discovery_time_ms": _mean(times), "discovery_time_ms_std": _pstdev(times),
                "traffic_bytes": _mean(traffic), "samples": len(times),
            })
    return res


# -- E3: latency ----------------------------------------------------------------------

def _e3_once(scenario: Scenario, mode: Mode, k: int, seed: str) -> tuple[float, float, float]:
    """(subscribe time ms, glass-to-glass ms, subscription-to-first-frame ms) for sample ``k``."""
    cfg = scenario.e3
    n = scenario.samples
    sim = Simulator(seed)
    link = LinkModel(cfg.link_ms, 0.0, scenario.link.per_message_overhead_bytes, 0.0)
    bus = Bus(sim, link, matching_delay_ms=cfg.matching_delay_ms)
    producer, consumer = scenario.producer, scenario.consumer
    stream = _video_stream(producer)
    meter = CpuMeter(scenario.cost)
    interval_us = ms_to_us(cfg.capture_interval_ms)
    encode_us = ms_to_us(cfg.encode_ms)
    # stratified phases: the subscription lands at a different point of the frame grid
    # in every sample, and so does the scene change within its capture interval
    phase = (k + 0.5) / n
    t_sub = ms_to_us(cfg.warmup_ms) + int(round(phase * interval_us))
    result: dict[str, float] = {}

    def rendered(env: Envelope) -> None:
        if result:
            return
        capture_us = env.publish_time_us - encode_us
        render_us = sim.now_us + ms_to_us(cfg.render_ms)
        result["g2g"] = (render_us - capture_us) / 1000.0 + phase * cfg.capture_interval_ms
        result["s2ff"] = (env.publish_time_us - t_sub) / 1000.0
        sim.stop()

    if mode is Mode.BASELINE:
        cam = bus.add_participant(f"{producer.name}.camera", producer.name, GLOBAL_DOMAIN)
        viewer = bus.add_participant(f"{consumer.name}.viewer", consumer.name, GLOBAL_DOMAIN)
        sim.at_us(t_sub, lambda: DecodingSubscriber(bus, viewer, to_dds_name(stream.compressed_topic), meter,
                                                    cfg.decode_ms, rendered))
    else:
        for spec in (producer, consumer):
            bus.add_router(RouterConfig(spec.domain, spec.name))
        cam = bus.add_participant(f"{producer.name}.camera", producer.name, producer.domain)
        dec = bus.add_participant(f"{consumer.name}.decoder", consumer.name, consumer.domain)
        node = DecoderNode(bus, dec, consumer.name, meter, cfg.load_delay_ms, cfg.decode_ms, cfg.relay_hop_ms,
                           cfg.gop_aligned_start, listen_events=False)
        node.handle_discovery(DiscoveryEvent(DiscoveryKind.DISCOVERED, producer.name, _metadata(producer)))
        viewer = bus.add_participant(f"{consumer.name}.viewer", consumer.name, consumer.domain)
        sim.at_us(t_sub, lambda: bus.subscriber(viewer, to_dds_name(stream.decoded_topic),
                                                lambda env: rendered(env.data), QoS.BEST_EFFORT))

    pub = bus.publisher(cam, to_dds_name(stream.compressed_topic), QoS.BEST_EFFORT)
    encoder = MockVideoEncoder(scenario.video)

    def capture(j: int) -> None:
        blob = encoder.encode()
        sim.schedule_us(encode_us, lambda: bus.publish(pub, blob.nbytes, blob))
        sim.schedule_us(interval_us, capture, j + 1)

    sim.at_us(0, capture, 0)
    sim.run(t_sub + ms_to_us(60_000))
    if not result:
        raise RuntimeError(f"{mode.value} sample {k}: no frame reached the viewer")
    return t_sub / 1000.0, result["g2g"], result["s2ff"]


def run_e3(scenario: Scenario, seed: int = 0) -> ExperimentResult:
    res = ExperimentResult("e3", scenario.modes)
    agent = scenario.consumer.name
    for mode in scenario.modes:
        g2g: list[float] = []
        s2ff: list[float] = []
        for r in range(scenario.seeds):
            tag = mode.value + (f".r{r}" if scenario.seeds > 1 else "")
            for k in range(scenario.samples):
                t, g, s = _e3_once(scenario, mode, k, seed_for(seed, "e3", mode.value, r, k))
                res.rows.append(MetricsRow(t, agent, f"{tag}.s{k:03d}.glass_to_glass_ms", g))
                res.rows.append(MetricsRow(t, agent, f"{tag}.s{k:03d}.sub_to_first_frame_ms", s))
                g2g.append(g)
                s2ff.append(s)
        res.summary.append({
            "mode": mode.value,
            "glass_to_glass_ms": _mean(g2g), "sub_to_first_frame_ms": _mean(s2ff),
            "sub_to_first_frame_ms_std": _pstdev(s2ff), "samples": len(g2g),
        })
    return res


EXPERIMENTS: dict[str, Callable[[Scenario, int], ExperimentResult]] = {"e1": run_e1, "e2": run_e2, "e3": run_e3}
