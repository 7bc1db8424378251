"""Programmatic fully qualified names for fleet communication.

A name is the ordered tuple ``(scope, agent, component, stream, resource)``
rendered as ``/<scope>/<agent>/<component>/<stream>/<resource>`` with absent
segments omitted. Segments are positional: the number of segments between
scope and resource decides which optional classes are present, so a
component always requires an agent and a stream always requires a component.

Catalog segments (component, stream, resource) are enum members, optionally
with a suffix (``camera`` + ``front`` renders ``camera_front``), or free text
when nothing in the catalog fits.
"""
from __future__ import annotations

import enum
import functools
import re
from dataclasses import dataclass
from typing import Optional, Union

__all__ = [
    "AGENT_ENV_VAR",
    "Component",
    "ConstraintViolation",
    "DdsKind",
    "FqnBuilder",
    "FqnError",
    "FqnTuple",
    "LexicalError",
    "ParseError",
    "PathTerminal",
    "Resource",
    "ResourceKind",
    "SanitizationEmpty",
    "Scope",
    "SegmentValue",
    "Stream",
    "build_fqn",
    "check_path_constraints",
    "parse_fqn",
    "resolve_agent_name",
    "sanitize",
    "to_dds_name",
]

AGENT_ENV_VAR = "SFG_AGENT_NAME"

SEGMENT_RE = re.compile(r"[a-z][a-z0-9_]*\Z")
SUFFIX_RE = re.compile(r"[a-z0-9_]+\Z")


class FqnError(ValueError):
    pass


class LexicalError(FqnError):
    pass


class ParseError(FqnError):
    pass


class SanitizationEmpty(FqnError):
    pass


class ConstraintViolation(FqnError):
    def __init__(self, message: str, terminal: "PathTerminal | None" = None, mask: "ResourceKind | None" = None):
        super().__init__(message)
        self.terminal = terminal
        self.mask = mask


class Scope(enum.Enum):
    LOCAL = "local"
    GLOBAL = "global"


class Component(enum.Enum):
    LIDAR = "lidar"
    CAMERA = "camera"
    LOCOMOTION_CONTROLLER = "locomotion_controller"


class Stream(enum.Enum):
    COLOR = "color"
    DEPTH = "depth"
    CAMERA_INFO = "camera_info"
    POINTCLOUD = "pointcloud"


class Resource(enum.Enum):
    IMAGE = "image"
    CAMERA_INFO = "camera_info"
    AGENT_HEARTBEAT = "agent_heartbeat"
    AGENT_DISCOVERY_EVENT = "agent_discovery_event"
    GET_METADATA = "get_metadata"
    TF = "tf"
    TF_STATIC = "tf_static"


class ResourceKind(enum.Flag):
    TOPIC = 1
    SERVICE = 2
    ACTION = 4


class PathTerminal(enum.Enum):
    AFTER_SCOPE = 1
    AFTER_AGENT = 2
    AFTER_COMPONENT = 3
    AFTER_STREAM = 4


PATH_MASKS = {
    PathTerminal.AFTER_SCOPE: ResourceKind.TOPIC | ResourceKind.SERVICE,
    PathTerminal.AFTER_AGENT: ResourceKind.TOPIC | ResourceKind.SERVICE | ResourceKind.ACTION,
    PathTerminal.AFTER_COMPONENT: ResourceKind.TOPIC | ResourceKind.SERVICE | ResourceKind.ACTION,
    PathTerminal.AFTER_STREAM: ResourceKind.TOPIC,
}

# Kind assumed by parse_fqn when the caller does not say.
DEFAULT_RESOURCE_KIND = {Resource.GET_METADATA: ResourceKind.SERVICE}


class DdsKind(enum.Enum):
    TOPIC = "rt/"
    SERVICE_REQUEST = "rq/"
    SERVICE_REPLY = "rr/"


CatalogMember = Union[Component, Stream, Resource]


def _check_segment_text(text: str, what: str = "segment") -> str:
    if not isinstance(text, str) or not SEGMENT_RE.match(text):
        raise LexicalError(f"invalid {what} {text!r}: must match [a-z][a-z0-9_]*")
    return text


@functools.lru_cache(maxsize=None)
def _longest_first(catalog: type[enum.Enum]) -> tuple[tuple[enum.Enum, str], ...]:
    return tuple((m, m.value) for m in sorted(catalog, key=lambda m: len(m.value), reverse=True))


@dataclass(frozen=True)
class SegmentValue:
    """One name segment: a catalog member or custom text, plus an optional suffix."""

    base: Union[CatalogMember, str]
    suffix: Optional[str] = None

    def __post_init__(self) -> None:
        if isinstance(self.base, str):
            _check_segment_text(self.base, "custom segment")
        elif not isinstance(self.base, (Component, Stream, Resource)):
            raise LexicalError(f"unsupported segment base {self.base!r}")
        if self.suffix is not None and not SUFFIX_RE.match(self.suffix):
            raise LexicalError(f"invalid suffix {self.suffix!r}")

    @property
    def is_custom(self) -> bool:
        return isinstance(self.base, str)

    @property
    def text(self) -> str:
        word = self.base if isinstance(self.base, str) else self.base.value
        return word if self.suffix is None else f"{word}_{self.suffix}"

    def __str__(self) -> str:
        return self.text

    @classmethod
    def from_text(cls, text: str, catalog: Optional[type[enum.Enum]] = None) -> "SegmentValue":
        """Resolve rendered text against ``catalog``; the longest member prefix wins."""
        _check_segment_text(text)
        if catalog is not None:
            for member, word in _longest_first(catalog):
                if text == word:
                    return cls(member)
                if text.startswith(word + "_") and len(text) > len(word) + 1:
                    return cls(member, text[len(word) + 1:])
        return cls(text)

    def canonical(self, catalog: Optional[type[enum.Enum]] = None) -> "SegmentValue":
        return SegmentValue.from_text(self.text, catalog)


def _as_segment(value, catalog) -> Optional[SegmentValue]:
    if value is None or isinstance(value, SegmentValue):
        return value
    if isinstance(value, enum.Enum):
        return SegmentValue(value)
    return SegmentValue.from_text(value, catalog)


@dataclass(frozen=True)
class FqnTuple:
    scope: Scope
    resource: SegmentValue
    agent: Optional[SegmentValue] = None
    component: Optional[SegmentValue] = None
    stream: Optional[SegmentValue] = None
    resource_kind: ResourceKind = ResourceKind.TOPIC

    @property
    def terminal(self) -> PathTerminal:
        if self.stream is not None:
            return PathTerminal.AFTER_STREAM
        if self.component is not None:
            return PathTerminal.AFTER_COMPONENT
        if self.agent is not None:
            return PathTerminal.AFTER_AGENT
        return PathTerminal.AFTER_SCOPE

    def segments(self) -> list[str]:
        parts = [self.scope.value]
        for seg in (self.agent, self.component, self.stream, self.resource):
            if seg is not None:
                parts.append(seg.text)
        return parts

    def canonical(self) -> "FqnTuple":
        return FqnTuple(
            scope=self.scope,
            resource=self.resource.canonical(Resource),
            agent=None if self.agent is None else self.agent.canonical(None),
            component=None if self.component is None else self.component.canonical(Component),
            stream=None if self.stream is None else self.stream.canonical(Stream),
            resource_kind=self.resource_kind,
        )


def check_path_constraints(fqn: FqnTuple) -> None:
    """Raise ConstraintViolation unless the path into the resource permits its kind."""
    if not isinstance(fqn.scope, Scope):
        raise ConstraintViolation(f"scope must be a Scope, got {fqn.scope!r}")
    if fqn.resource is None:
        raise ConstraintViolation("resource segment is mandatory")
    if fqn.stream is not None and fqn.component is None:
        raise ConstraintViolation("a stream segment requires a component segment")
    if fqn.component is not None and fqn.agent is None:
        raise ConstraintViolation("a component segment requires an agent segment")
    kind = fqn.resource_kind
    if bin(kind.value).count("1") != 1:
        raise ConstraintViolation(f"resource kind must be a single kind, got {kind!r}")
    terminal = fqn.terminal
    mask = PATH_MASKS[terminal]
    if not mask & kind:
        raise ConstraintViolation(
            f"{kind.name.lower()} not permitted after {terminal.name.lower()} (mask {mask!r})",
            terminal=terminal,
            mask=mask,
        )


def build_fqn(fqn: FqnTuple) -> str:
    check_path_constraints(fqn)
    for seg in (fqn.agent, fqn.component, fqn.stream, fqn.resource):
        if seg is not None:
            _check_segment_text(seg.text)
    return "/" + "/".join(fqn.segments())


def parse_fqn(text: str, kind: Optional[ResourceKind] = None) -> FqnTuple:
    """Inverse of :func:`build_fqn`.

    The resource kind is not part of the text; when ``kind`` is omitted the
    catalog default is used (services for ``get_metadata``, topics otherwise).
    """
    if not isinstance(text, str) or not text.startswith("/"):
        raise ParseError(f"name must start with '/': {text!r}")
    parts = text[1:].split("/")
    if any(p == "" for p in parts):
        raise ParseError(f"empty segment in {text!r}")
    if len(parts) < 2:
        raise ParseError(f"too few segments in {text!r}")
    if len(parts) > 5:
        raise ParseError(f"too many segments in {text!r}")
    try:
        scope = Scope(parts[0])
    except ValueError:
        raise ParseError(f"unknown scope {parts[0]!r}") from None
    try:
        middle = parts[1:-1]
        agent = SegmentValue.from_text(middle[0]) if len(middle) > 0 else None
        component = SegmentValue.from_text(middle[1], Component) if len(middle) > 1 else None
        stream = SegmentValue.from_text(middle[2], Stream) if len(middle) > 2 else None
        resource = SegmentValue.from_text(parts[-1], Resource)
    except LexicalError as exc:
        raise ParseError(str(exc)) from None
    if kind is None:
        kind = DEFAULT_RESOURCE_KIND.get(resource.base, ResourceKind.TOPIC)
    fqn = FqnTuple(scope, resource, agent, component, stream, kind)
    try:
        check_path_constraints(fqn)
    except ConstraintViolation as exc:
        raise ParseError(str(exc)) from None
    return fqn


def sanitize(raw: str) -> str:
    text = re.sub(r"[^a-z0-9]", "_", raw.lower())
    text = re.sub(r"_+", "_", text)
    return text.lstrip("0123456789_")


def resolve_agent_name(env_value: Optional[str], hostname: str) -> SegmentValue:
    """Agent segment from the override variable, falling back to the hostname."""
    if env_value:
        candidate = sanitize(env_value)
        if candidate and SEGMENT_RE.match(candidate):
            return SegmentValue(candidate)
    if not hostname:
        raise SanitizationEmpty("hostname is empty")
    candidate = sanitize(hostname)
    if not candidate:
        raise SanitizationEmpty(f"nothing left of hostname {hostname!r} after sanitizing")
    return SegmentValue(candidate)


def to_dds_name(fqn_text: str, kind: DdsKind = DdsKind.TOPIC) -> str:
    if not fqn_text.startswith("/"):
        raise FqnError(f"name must start with '/': {fqn_text!r}")
    return kind.value + fqn_text[1:]


class FqnBuilder:
    """Fluent construction of names.

    >>> FqnBuilder(Scope.GLOBAL).agent("go2").resource(Resource.GET_METADATA, kind=ResourceKind.SERVICE).build()
    '/global/go2/get_metadata'
    """

    def __init__(self, scope: Scope):
        self._scope = scope
        self._agent: Optional[SegmentValue] = None
        self._component: Optional[SegmentValue] = None
        self._stream: Optional[SegmentValue] = None
        self._resource: Optional[SegmentValue] = None
        self._kind = ResourceKind.TOPIC

    def agent(self, name=None) -> "FqnBuilder":
        if name is None:
            import os
            import socket

            name = resolve_agent_name(os.environ.get(AGENT_ENV_VAR), socket.gethostname())
        self._agent = _as_segment(name, None)
        return self

    def component(self, value, suffix: Optional[str] = None) -> "FqnBuilder":
        self._component = SegmentValue(value, suffix) if suffix else _as_segment(value, Component)
        return self

    def stream(self, value, suffix: Optional[str] = None) -> "FqnBuilder":
        self._stream = SegmentValue(value, suffix) if suffix else _as_segment(value, Stream)
        return self

    def resource(self, value, suffix: Optional[str] = None, kind: ResourceKind = ResourceKind.TOPIC) -> "FqnBuilder":
        self._resource = SegmentValue(value, suffix) if suffix else _as_segment(value, Resource)
        self._kind = kind
        return self

    def tuple(self) -> FqnTuple:
        if self._resource is None:
            raise ConstraintViolation("resource segment is mandatory")
        return FqnTuple(self._scope, self._resource, self._agent, self._component, self._stream, self._kind)

    def build(self) -> str:
        return build_fqn(self.tuple())
