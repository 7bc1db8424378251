"""Rigid transforms, a timestamped transform tree, and proxy-frame publication.

``Transform(parent, child, ...)`` maps coordinates expressed in ``child``
into ``parent`` (the pose of ``child`` relative to ``parent``). Composition
chains ``a->b`` with ``b->c`` into ``a->c``.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

Vec3 = tuple[float, float, float]
Quat = tuple[float, float, float, float]  # (w, x, y, z)

IDENTITY_Q: Quat = (1.0, 0.0, 0.0, 0.0)
ZERO_V: Vec3 = (0.0, 0.0, 0.0)


class TfError(Exception):
    pass


class FrameMismatch(TfError):
    pass


class Disconnected(TfError):
    pass


class Extrapolation(TfError):
    pass


class MultiRoot(TfError):
    def __init__(self, roots):
        super().__init__(f"expected a single root, found {sorted(roots)}")
        self.roots = frozenset(roots)


class CycleDetected(TfError):
    pass


class EmptyTree(TfError):
    pass


class UnmappedObject(TfError):
    pass


# -- quaternion helpers -------------------------------------------------------

def quat_normalize(q: Sequence[float]) -> Quat:
    w, x, y, z = (float(c) for c in q)
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if n == 0.0 or not math.isfinite(n):
        raise ValueError(f"cannot normalize quaternion {tuple(q)}")
    return (w / n, x / n, y / n, z / n)


def quat_mul(a: Quat, b: Quat) -> Quat:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def quat_conj(q: Quat) -> Quat:
    return (q[0], -q[1], -q[2], -q[3])


def quat_rotate(q: Quat, v: Sequence[float]) -> Vec3:
    # v' = v + 2w(u x v) + 2u x (u x v), u = vector part
    w, ux, uy, uz = q
    vx, vy, vz = v
    cx = uy * vz - uz * vy
    cy = uz * vx - ux * vz
    cz = ux * vy - uy * vx
    ccx = uy * cz - uz * cy
    ccy = uz * cx - ux * cz
    ccz = ux * cy - uy * cx
    return (vx + 2.0 * (w * cx + ccx), vy + 2.0 * (w * cy + ccy), vz + 2.0 * (w * cz + ccz))


def quat_from_axis_angle(axis: Sequence[float], angle: float) -> Quat:
    ax, ay, az = axis
    n = math.sqrt(ax * ax + ay * ay + az * az)
    s = math.sin(angle / 2.0) / n
    return quat_normalize((math.cos(angle / 2.0), ax * s, ay * s, az * s))


def quat_from_yaw_pitch(yaw: float, pitch: float) -> Quat:
    """Rotation about world z by ``yaw`` followed by body y by ``pitch`` (zero roll)."""
    return quat_normalize(quat_mul(quat_from_axis_angle((0, 0, 1), yaw), quat_from_axis_angle((0, 1, 0), pitch)))


def quat_slerp(a: Quat, b: Quat, u: float) -> Quat:
    dot = sum(x * y for x, y in zip(a, b))
    if dot < 0.0:
        b = (-b[0], -b[1], -b[2], -b[3])
        dot = -dot
    if dot > 0.9995:
        return quat_normalize(tuple(x + u * (y - x) for x, y in zip(a, b)))
    theta = math.acos(min(dot, 1.0))
    s = math.sin(theta)
    wa = math.sin((1.0 - u) * theta) / s
    wb = math.sin(u * theta) / s
    return quat_normalize(tuple(wa * x + wb * y for x, y in zip(a, b)))


def yaw_of(q: Quat) -> float:
    w, x, y, z = q
    return math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))


# -- transforms ----------------------------------------------------------------

@dataclass(frozen=True)
class Transform:
    parent: str
    child: str
    translation: Vec3 = ZERO_V
    rotation: Quat = IDENTITY_Q
    stamp: float = 0.0
    static: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "translation", tuple(float(c) for c in self.translation))
        object.__setattr__(self, "rotation", quat_normalize(self.rotation))

    @classmethod
    def identity(cls, frame: str, stamp: float = 0.0) -> "Transform":
        return cls(frame, frame, stamp=stamp, static=True)

    def inverse(self) -> "Transform":
        qi = quat_conj(self.rotation)
        t = quat_rotate(qi, self.translation)
        return Transform(self.child, self.parent, (-t[0], -t[1], -t[2]), qi, self.stamp, self.static)

    def with_frames(self, parent: str, child: str) -> "Transform":
        return Transform(parent, child, self.translation, self.rotation, self.stamp, self.static)

    def as_matrix(self) -> list[list[float]]:
        w, x, y, z = self.rotation
        tx, ty, tz = self.translation
        return [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y), tx],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x), ty],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y), tz],
            [0.0, 0.0, 0.0, 1.0],
        ]


def compose(a: Transform, b: Transform) -> Transform:
    if a.child != b.parent:
        raise FrameMismatch(f"cannot chain {a.parent}->{a.child} with {b.parent}->{b.child}")
    rot = quat_normalize(quat_mul(a.rotation, b.rotation))
    r = quat_rotate(a.rotation, b.translation)
    trans = (a.translation[0] + r[0], a.translation[1] + r[1], a.translation[2] + r[2])
    return Transform(a.parent, b.child, trans, rot, max(a.stamp, b.stamp), a.static and b.static)


# -- tree ----------------------------------------------------------------------

@dataclass
class _Edge:
    parent: str
    static: bool
    stamps: list = field(default_factory=list)
    samples: list = field(default_factory=list)

    def at(self, time: Optional[float]) -> Transform:
        if self.static or time is None:
            return self.samples[-1]
        i = bisect.bisect_right(self.stamps, time)
        if i == 0:
            raise Extrapolation(f"no sample for {self.parent}->{self.samples[0].child} at or before t={time}")
        return self.samples[i - 1]


class TfTree:
    """Transform forest keyed by child frame; each child has one parent."""

    def __init__(self, transforms: Iterable[Transform] = ()):
        self._edges: dict[str, _Edge] = {}
        self._frames: set[str] = set()
        for tf in transforms:
            self.set_transform(tf)

    @property
    def frames(self) -> frozenset[str]:
        return frozenset(self._frames)

    def parent_of(self, frame: str) -> Optional[str]:
        edge = self._edges.get(frame)
        return None if edge is None else edge.parent

    def set_transform(self, tf: Transform) -> None:
        if tf.parent == tf.child:
            raise FrameMismatch(f"self-loop on frame {tf.parent!r}")
        edge = self._edges.get(tf.child)
        if edge is None or edge.parent != tf.parent or edge.static != tf.static:
            edge = self._edges[tf.child] = _Edge(tf.parent, tf.static)
        self._frames.update((tf.parent, tf.child))
        if tf.static:
            edge.stamps[:] = [tf.stamp]
            edge.samples[:] = [tf]
            return
        i = bisect.bisect_right(edge.stamps, tf.stamp)
        if i > 0 and edge.stamps[i - 1] == tf.stamp:
            edge.samples[i - 1] = tf
        else:
            edge.stamps.insert(i, tf.stamp)
            edge.samples.insert(i, tf)

    def _chain_to_root(self, frame: str) -> list[str]:
        chain = [frame]
        seen = {frame}
        while True:
            parent = self.parent_of(chain[-1])
            if parent is None:
                return chain
            if parent in seen:
                raise CycleDetected(f"cycle through frame {parent!r}")
            seen.add(parent)
            chain.append(parent)

    def _from_ancestor(self, chain: list[str], upto: int, time: Optional[float]) -> Transform:
        """Transform ancestor->frame where ancestor = chain[upto], frame = chain[0]."""
        result = Transform.identity(chain[upto])
        for k in range(upto, 0, -1):
            result = compose(result, self._edges[chain[k - 1]].at(time))
        return result

    def lookup(self, target: str, source: str, time: Optional[float] = None) -> Transform:
        """Return ``target->source``: the pose of ``source`` expressed in ``target``.

        ``time=None`` takes the latest sample of every dynamic edge.
        """
        for f in (target, source):
            if f not in self._frames:
                raise Disconnected(f"unknown frame {f!r}")
        if target == source:
            return Transform.identity(target, 0.0 if time is None else time)
        up_t = self._chain_to_root(target)
        up_s = self._chain_to_root(source)
        index_t = {f: i for i, f in enumerate(up_t)}
        common = next((i for i, f in enumerate(up_s) if f in index_t), None)
        if common is None:
            raise Disconnected(f"no path between {target!r} and {source!r}")
        anc_t = index_t[up_s[common]]
        to_target = self._from_ancestor(up_t, anc_t, time)
        to_source = self._from_ancestor(up_s, common, time)
        return compose(to_target.inverse(), to_source)


def validate_single_root(tree: TfTree, frames: Optional[Iterable[str]] = None) -> str:
    """Return the unique parentless frame among ``frames`` (default: all frames).

    A frame counts as a root when its parent lies outside the considered set.
    """
    subset = set(tree.frames if frames is None else frames)
    if not subset:
        raise EmptyTree("no frames to validate")
    for f in subset:
        seen = {f}
        p = tree.parent_of(f)
        while p is not None and p in subset:
            if p in seen:
                raise CycleDetected(f"cycle through frame {p!r}")
            seen.add(p)
            p = tree.parent_of(p)
    roots = {f for f in subset if tree.parent_of(f) not in subset}
    if not roots:
        raise CycleDetected("every frame has a parent")
    if len(roots) > 1:
        raise MultiRoot(roots)
    return next(iter(roots))


def vicon_bridge_publish(
    tree: TfTree,
    mapping: dict[str, str],
    object_id: str,
    map_to_markers: Transform,
    base_frame: str,
    time: Optional[float] = None,
) -> Transform:
    """Publish ``map->base`` for a tracked object via its marker frame.

    ``mapping`` takes tracker object ids to marker frame ids. The marker frame
    itself is never attached to the map, so a base-rooted description keeps
    its single root.
    """
    if object_id not in mapping:
        raise UnmappedObject(f"no frame mapping for tracked object {object_id!r}")
    markers = mapping[object_id]
    markers_to_base = tree.lookup(markers, base_frame, time)
    measured = map_to_markers.with_frames(map_to_markers.parent, markers)
    result = compose(measured, markers_to_base)
    result = Transform(result.parent, base_frame, result.translation, result.rotation, map_to_markers.stamp, False)
    tree.set_transform(result)
    return result


def check_injective(mapping: dict[str, str]) -> None:
    values = list(mapping.values())
    if len(set(values)) != len(values):
        raise ValueError("tracked object mapping must be injective")
