from __future__ import annotations

import pytest

from oracles import forwarded, name_corpus
from fleetsim.router import (
    GLOBAL_DOMAIN,
    Direction,
    ForwardingRule,
    RouterConfig,
    RouterError,
    TfMessage,
    UnknownOrigin,
    default_rules,
    matches,
    rewrite_tf_frames,
    route,
    rule_patterns,
    rules_from_patterns,
)
from fleetsim.transforms import Transform

def test_corpus_size():
    assert len(name_corpus()) >= 1000


def test_default_rules():
    assert rule_patterns(default_rules()) == ["rt/tf", "rt/tf_static", "rt/global/*", "rq/global/*", "rr/global/*"]
    assert "rt/local/*" not in rule_patterns(default_rules())


@pytest.mark.parametrize("pattern,name,expected", [
    ("rt/global/*", "rt/global/pose", True),
    ("rt/tf", "rt/tf_static", False),
    ("rq/global/*", "rq/local/go2/get_metadata", False),
    ("rt/global/*", "rt/globalx/pose", False),
    ("rt/tf", "rt/tf", True),
])
def test_matches(pattern, name, expected):
    assert matches(ForwardingRule(pattern), name) is expected


@pytest.mark.parametrize("pattern", ["", "rt/*/x", "rt/global*", "*"])
def test_bad_patterns(pattern):
    with pytest.raises(RouterError):
        ForwardingRule(pattern)


def test_rules_round_trip():
    assert rules_from_patterns(rule_patterns(default_rules())) == default_rules()


@pytest.mark.parametrize("origin,name,expected", [
    (7, "rt/global/agent_heartbeat", {7, 0}),
    (7, "rt/local/go2/odom", {7}),
    (0, "rt/tf", {7, 0}),
    (0, "rt/local/go2/odom", {0}),
])
def test_route_examples(origin, name, expected):
    assert route(RouterConfig(7, "go2"), origin, name) == frozenset(expected)


def test_route_agrees_with_oracle():
    cfg = RouterConfig(3, "go2")
    for name in name_corpus():
        for origin in (3, GLOBAL_DOMAIN):
            got = route(cfg, origin, name)
            expected = {3, GLOBAL_DOMAIN} if forwarded(name) else {origin}
            assert got == expected, name
            assert not ({d for d in got if d != GLOBAL_DOMAIN} - {3})


def test_unknown_origin():
    with pytest.raises(UnknownOrigin):
        route(RouterConfig(3, "go2"), 5, "rt/global/x")


@pytest.mark.parametrize("domain", [0, -1])
def test_router_needs_local_domain(domain):
    with pytest.raises(RouterError):
        RouterConfig(domain, "go2")


def _tf(parent, child):
    return Transform(parent, child, (1.0, 0.0, 0.0))


def test_outbound_prefixes_frames():
    msg = TfMessage((_tf("map", "base"),))
    assert rewrite_tf_frames(msg, "go2", Direction.OUTBOUND).frames == ["go2/map", "go2/base"]


def test_outbound_rewrite_idempotent():
    msg = TfMessage((_tf("go2/base", "leg"),))
    once = rewrite_tf_frames(msg, "go2", Direction.OUTBOUND)
    assert once.frames == ["go2/base", "go2/leg"]
    assert rewrite_tf_frames(once, "go2", Direction.OUTBOUND) == once


def test_inbound_untouched():
    msg = TfMessage((_tf("go2/base", "go2/leg"),))
    assert rewrite_tf_frames(msg, "go2", Direction.INBOUND) is msg


def test_rewrite_keeps_geometry():
    msg = TfMessage((Transform("map", "base", (1, 2, 3), (0.0, 0.0, 0.0, 1.0)),))
    out = rewrite_tf_frames(msg, "go2", Direction.OUTBOUND).transforms[0]
    assert out.translation == (1.0, 2.0, 3.0)
    assert out.rotation == (0.0, 0.0, 0.0, 1.0)
