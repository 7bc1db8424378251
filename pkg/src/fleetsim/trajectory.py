"""Waypoint trajectories: sampling, alignment heuristics and scene files."""
from __future__ import annotations

import enum
import math
from bisect import bisect_right
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import yaml

from .transforms import IDENTITY_Q, Quat, Vec3, quat_from_yaw_pitch, quat_normalize, quat_slerp


class SchemaError(ValueError):
    pass


class TooFewWaypoints(ValueError):
    pass


class Alignment(enum.Enum):
    MANUAL = "manual"
    ALIGN_TO_NEXT = "next"
    ALIGN_TO_PREVIOUS = "previous"


@dataclass(frozen=True)
class Waypoint:
    position: Vec3
    t: float
    orientation: Quat = IDENTITY_Q

    def __post_init__(self) -> None:
        if not self.t >= 0.0:
            raise SchemaError(f"waypoint time must be >= 0, got {self.t}")
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        object.__setattr__(self, "orientation", quat_normalize(self.orientation))


@dataclass(frozen=True)
class Trajectory:
    name: str
    waypoints: tuple[Waypoint, ...]
    frame: str = "map"

    def __post_init__(self) -> None:
        wps = tuple(self.waypoints)
        object.__setattr__(self, "waypoints", wps)
        if not wps:
            raise SchemaError(f"trajectory {self.name!r} has no waypoints")
        for a, b in zip(wps, wps[1:]):
            if not b.t > a.t:
                raise SchemaError(f"trajectory {self.name!r}: times must be strictly increasing ({a.t} then {b.t})")

    @property
    def times(self) -> list[float]:
        return [w.t for w in self.waypoints]


def sample(traj: Trajectory, t: float) -> tuple[Vec3, Quat]:
    """Pose at time ``t``; clamps outside the knot range."""
    wps = traj.waypoints
    if t <= wps[0].t:
        return wps[0].position, wps[0].orientation
    if t >= wps[-1].t:
        return wps[-1].position, wps[-1].orientation
    i = bisect_right(traj.times, t) - 1
    a, b = wps[i], wps[i + 1]
    if t == a.t:
        return a.position, a.orientation
    u = (t - a.t) / (b.t - a.t)
    pos = tuple(pa + u * (pb - pa) for pa, pb in zip(a.position, b.position))
    return pos, quat_slerp(a.orientation, b.orientation, u)


def heading(direction: Sequence[float], eps: float = 1e-12):
    """Zero-roll orientation pointing body x along ``direction``, or None if undefined."""
    dx, dy, dz = direction
    horizontal = math.hypot(dx, dy)
    if horizontal <= eps:
        return None
    return quat_from_yaw_pitch(math.atan2(dy, dx), -math.atan2(dz, horizontal))


def apply_alignment(traj: Trajectory, mode: Alignment) -> Trajectory:
    if mode is Alignment.MANUAL:
        return traj
    wps = list(traj.waypoints)
    n = len(wps)
    if n < 2:
        raise TooFewWaypoints(f"alignment needs at least 2 waypoints, got {n}")

    def direction(i: int, j: int) -> tuple[float, float, float]:
        return tuple(b - a for a, b in zip(wps[i].position, wps[j].position))

    out = list(wps)
    if mode is Alignment.ALIGN_TO_NEXT:
        for i in range(n - 1):
            q = heading(direction(i, i + 1))
            if q is not None:
                out[i] = replace(wps[i], orientation=q)
        out[-1] = replace(wps[-1], orientation=out[-2].orientation)
    else:
        for i in range(1, n):
            q = heading(direction(i - 1, i))
            if q is not None:
                out[i] = replace(wps[i], orientation=q)
        out[0] = replace(wps[0], orientation=out[1].orientation)
    return replace(traj, waypoints=tuple(out))


# -- scene files ---------------------------------------------------------------

def scene_to_dict(trajectories: Iterable[Trajectory]) -> dict:
    return {
        "trajectories": [
            {
                "name": tr.name,
                "frame": tr.frame,
                "waypoints": [
                    {"t": w.t, "position": list(w.position), "orientation_wxyz": list(w.orientation)}
                    for w in tr.waypoints
                ],
            }
            for tr in trajectories
        ]
    }


def serialize_scene(trajectories: Iterable[Trajectory]) -> str:
    return yaml.safe_dump(scene_to_dict(trajectories), sort_keys=False, default_flow_style=None)


def _require(mapping, key, where):
    if not isinstance(mapping, dict) or key not in mapping:
        raise SchemaError(f"missing key {key!r} in {where}")
    return mapping[key]


def _floats(value, n, where) -> tuple:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise SchemaError(f"{where} must be a list of {n} numbers")
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise SchemaError(f"{where} must be numeric") from None


def deserialize_scene(text: str) -> list[Trajectory]:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError(f"unreadable scene: {exc}") from None
    items = _require(doc, "trajectories", "scene")
    if not isinstance(items, list):
        raise SchemaError("'trajectories' must be a list")
    result = []
    for k, item in enumerate(items):
        where = f"trajectories[{k}]"
        name = str(_require(item, "name", where))
        frame = str(_require(item, "frame", where))
        raw = _require(item, "waypoints", where)
        if not isinstance(raw, list):
            raise SchemaError(f"{where}.waypoints must be a list")
        wps = []
        for j, w in enumerate(raw):
            wwhere = f"{where}.waypoints[{j}]"
            t = _floats([_require(w, "t", wwhere)], 1, f"{wwhere}.t")[0]
            pos = _floats(_require(w, "position", wwhere), 3, f"{wwhere}.position")
            q = _floats(_require(w, "orientation_wxyz", wwhere), 4, f"{wwhere}.orientation_wxyz")
            try:
                wps.append(Waypoint(pos, t, q))
            except ValueError as exc:
                raise SchemaError(f"{wwhere}: {exc}") from None
        result.append(Trajectory(name, tuple(wps), frame))
    return result


def find(trajectories: Iterable[Trajectory], name: str) -> Trajectory:
    for tr in trajectories:
        if tr.name == name:
            return tr
    raise KeyError(name)
