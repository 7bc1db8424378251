"""Forwarding rules between an agent's local domain and the global domain."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .transforms import Transform

GLOBAL_DOMAIN = 0


class RouterError(ValueError):
    pass


class UnknownOrigin(RouterError):
    pass


@dataclass(frozen=True)
class ForwardingRule:
    """Exact DDS name, or a prefix ending in ``/*``."""

    pattern: str

    def __post_init__(self) -> None:
        p = self.pattern
        if not p or "*" in p[:-1]:
            raise RouterError(f"wildcard may only be the final character: {p!r}")
        if p.endswith("*") and not p.endswith("/*"):
            raise RouterError(f"wildcard must follow '/': {p!r}")

    @property
    def is_wildcard(self) -> bool:
        return self.pattern.endswith("*")

    def matches(self, name: str) -> bool:
        if self.is_wildcard:
            return name.startswith(self.pattern[:-1])
        return name == self.pattern


def matches(rule: ForwardingRule, name: str) -> bool:
    return rule.matches(name)


def default_rules() -> list[ForwardingRule]:
    return [ForwardingRule(p) for p in ("rt/tf", "rt/tf_static", "rt/global/*", "rq/global/*", "rr/global/*")]


@dataclass(frozen=True)
class RouterConfig:
    local_domain: int
    agent: str
    rules: tuple[ForwardingRule, ...] = field(default_factory=lambda: tuple(default_rules()))
    tf_topics: frozenset[str] = frozenset({"rt/tf", "rt/tf_static"})

    def __post_init__(self) -> None:
        if self.local_domain == GLOBAL_DOMAIN or self.local_domain < 0:
            raise RouterError(f"local domain must be a positive integer, got {self.local_domain}")
        object.__setattr__(self, "rules", tuple(r if isinstance(r, ForwardingRule) else ForwardingRule(r) for r in self.rules))
        object.__setattr__(self, "tf_topics", frozenset(self.tf_topics))

    def forwards(self, name: str) -> bool:
        return any(rule.matches(name) for rule in self.rules)


def route(config: RouterConfig, origin_domain: int, name: str) -> frozenset[int]:
    if origin_domain not in (config.local_domain, GLOBAL_DOMAIN):
        raise UnknownOrigin(f"domain {origin_domain} is not bridged by the router for {config.agent!r}")
    if config.forwards(name):
        return frozenset((config.local_domain, GLOBAL_DOMAIN))
    return frozenset((origin_domain,))


class Direction(enum.Enum):
    OUTBOUND = "outbound"  # local -> global
    INBOUND = "inbound"  # global -> local


@dataclass(frozen=True)
class TfMessage:
    transforms: tuple[Transform, ...]

    @property
    def frames(self) -> list[str]:
        return [f for tf in self.transforms for f in (tf.parent, tf.child)]


def prefix_frame(frame: str, agent: str) -> str:
    return frame if "/" in frame else f"{agent}/{frame}"


def rewrite_tf_frames(message: TfMessage, agent: str, direction: Direction) -> TfMessage:
    if direction is Direction.INBOUND:
        return message
    return TfMessage(
        tuple(tf.with_frames(prefix_frame(tf.parent, agent), prefix_frame(tf.child, agent)) for tf in message.transforms)
    )


def rule_patterns(rules: Iterable[ForwardingRule]) -> list[str]:
    return [r.pattern for r in rules]


def rules_from_patterns(patterns: Sequence[str]) -> list[ForwardingRule]:
    return [ForwardingRule(p) for p in patterns]
