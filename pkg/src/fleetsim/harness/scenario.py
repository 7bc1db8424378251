"""Scenario files: YAML mappings whose sections override the built-in defaults."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

import yaml

from ..codecs.cost import CostModel
from ..codecs.video import MockVideoConfig
from ..lifecycle import LifecycleParams
from ..sim.bus import LinkModel
from ..sim.multicast import MulticastParams


class ConfigError(ValueError):
    pass


class Mode(enum.Enum):
    BASELINE = "baseline"
    SFGROS = "sfgros"


@dataclass(frozen=True)
class AgentSpec:
    name: str
    domain: int
    nodes: int = 20
    streams: tuple[tuple[str, str, str], ...] = ()  # (component, stream, codec)


@dataclass(frozen=True)
class E1Config:
    n_min: int = 1
    n_max: int = 10
    warmup_ms: float = 2000.0
    camera_info_bytes: int = 0


@dataclass(frozen=True)
class E2Config:
    fleet_min: int = 2
    fleet_max: int = 6
    nodes_per_agent: int = 20
    streams_per_agent: int = 2
    multicast: MulticastParams = MulticastParams()


@dataclass(frozen=True)
class E3Config:
    capture_interval_ms: float = 33.3
    encode_ms: float = 20.0
    link_ms: float = 60.0
    decode_ms: float = 15.0
    render_ms: float = 6.65
    relay_hop_ms: float = 2.6
    matching_delay_ms: float = 553.0
    load_delay_ms: float = 525.0
    gop_aligned_start: bool = False
    warmup_ms: float = 1000.0


def _default_agents() -> tuple[AgentSpec, ...]:
    return (
        AgentSpec("go2", 1, 20, (("camera_front", "color", "h264"), ("camera_front", "depth", "rvl"))),
        AgentSpec("base_station", 2, 20, ()),
    )


@dataclass(frozen=True)
class Scenario:
    modes: tuple[Mode, ...] = (Mode.BASELINE, Mode.SFGROS)
    agents: tuple[AgentSpec, ...] = field(default_factory=_default_agents)
    link: LinkModel = LinkModel()
    cost: CostModel = CostModel()
    video: MockVideoConfig = MockVideoConfig()
    lifecycle: LifecycleParams = LifecycleParams()
    samples: int = 120
    seeds: int = 1
    duration_ms: Optional[float] = None
    e1: E1Config = E1Config()
    e2: E2Config = E2Config()
    e3: E3Config = E3Config()

    def __post_init__(self) -> None:
        if self.samples < 1 or self.seeds < 1:
            raise ConfigError("samples and seeds must be >= 1")
        names = [a.name for a in self.agents]
        if len(set(names)) != len(names):
            raise ConfigError("agent names must be unique")
        domains = [a.domain for a in self.agents]
        if any(d <= 0 for d in domains) or len(set(domains)) != len(domains):
            raise ConfigError("each agent needs a distinct nonzero domain")
        if len(self.agents) < 2:
            raise ConfigError("need a producer and a consumer agent")
        if not self.agents[0].streams:
            raise ConfigError("the first agent (producer) must declare at least one stream")
        if not 1 <= self.e1.n_min <= self.e1.n_max:
            raise ConfigError("e1 subscriber range must satisfy 1 <= min <= max")
        if not 1 <= self.e2.fleet_min <= self.e2.fleet_max:
            raise ConfigError("e2 fleet range must satisfy 1 <= min <= max")

    @property
    def producer(self) -> AgentSpec:
        return self.agents[0]

    @property
    def consumer(self) -> AgentSpec:
        return self.agents[1]


def _section(cls, raw: Any, where: str, base=None):
    """Build dataclass ``cls`` from a mapping, rejecting unknown keys."""
    if raw is None:
        return base if base is not None else cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")
    values = {}
    for key, value in raw.items():
        if key == "multicast":
            value = _section(MulticastParams, value, f"{where}.multicast")
        values[key] = value
    try:
        return replace(base, **values) if base is not None else cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _agents(raw: Any) -> tuple[AgentSpec, ...]:
    if not isinstance(raw, list):
        raise ConfigError("agents must be a list")
    out = []
    for k, item in enumerate(raw):
        if not isinstance(item, dict) or "name" not in item or "domain" not in item:
            raise ConfigError(f"agents[{k}] needs name and domain")
        streams = []
        for s in item.get("streams", []) or []:
            if not isinstance(s, dict) or not {"component", "stream", "codec"} <= set(s):
                raise ConfigError(f"agents[{k}].streams entries need component, stream and codec")
            streams.append((str(s["component"]), str(s["stream"]), str(s["codec"])))
        try:
            out.append(AgentSpec(str(item["name"]), int(item["domain"]), int(item.get("nodes", 20)), tuple(streams)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"agents[{k}]: {exc}") from None
    return tuple(out)


def _modes(raw: Any) -> tuple[Mode, ...]:
    if raw in (None, "both"):
        return (Mode.BASELINE, Mode.SFGROS)
    items = raw if isinstance(raw, list) else [raw]
    try:
        return tuple(Mode(str(m).lower()) for m in items)
    except ValueError:
        raise ConfigError(f"mode must be baseline, sfgros or both, got {raw!r}") from None


_TOP = {"mode", "agents", "link", "cost", "video", "lifecycle", "samples", "seeds", "duration_ms", "e1", "e2", "e3"}


def scenario_from_dict(doc: Optional[dict]) -> Scenario:
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError("scenario must be a mapping")
    unknown = sorted(set(doc) - _TOP)
    if unknown:
        raise ConfigError(f"unknown scenario keys: {', '.join(unknown)}")
    kwargs: dict[str, Any] = {"modes": _modes(doc.get("mode"))}
    if "agents" in doc:
        kwargs["agents"] = _agents(doc["agents"])
    for key, cls in (("link", LinkModel), ("cost", CostModel), ("video", MockVideoConfig),
                     ("lifecycle", LifecycleParams), ("e1", E1Config), ("e2", E2Config), ("e3", E3Config)):
        if key in doc:
            kwargs[key] = _section(cls, doc[key], key)
    for key in ("samples", "seeds"):
        if key in doc:
            kwargs[key] = int(doc[key])
    if doc.get("duration_ms") is not None:
        kwargs["duration_ms"] = float(doc["duration_ms"])
    try:
        return Scenario(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_scenario(path: "str | Path | None") -> Scenario:
    if path is None:
        return Scenario()
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"unreadable scenario: {exc}") from None
    return scenario_from_dict(doc)
