"""Command-line entry point: ``fleetsim sim|fqn|traj|codec``.

Exit codes: 0 success, 1 validation failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .. import fqn as fq
from ..codecs import rvl
from ..codecs.errors import CorruptStream
from ..trajectory import SchemaError, deserialize_scene, find, sample
from .experiments import EXPERIMENTS
from .scenario import ConfigError, load_scenario

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


def _fail(msg: str, code: int = EXIT_INVALID) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _tuple_dict(t: fq.FqnTuple) -> dict:
    def seg(v):
        return None if v is None else v.text

    return {
        "scope": t.scope.value,
        "agent": seg(t.agent),
        "component": seg(t.component),
        "stream": seg(t.stream),
        "resource": seg(t.resource),
        "kind": t.resource_kind.name.lower(),
    }


_KINDS = {"topic": fq.ResourceKind.TOPIC, "service": fq.ResourceKind.SERVICE, "action": fq.ResourceKind.ACTION}


def cmd_sim(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ConfigError as exc:
        return _fail(str(exc))
    result = EXPERIMENTS[args.experiment](scenario, args.seed)
    csv_text = result.to_csv()
    if args.out:
        Path(args.out).write_text(csv_text)
    if args.summary:
        Path(args.summary).write_text(result.to_json() + "\n")
    print(result.to_json())
    return EXIT_OK


def cmd_fqn_check(args) -> int:
    try:
        t = fq.parse_fqn(args.name, _KINDS[args.kind] if args.kind else None)
    except fq.FqnError as exc:
        return _fail(f"{args.name!r}: {exc}")
    print(json.dumps(_tuple_dict(t), sort_keys=True))
    return EXIT_OK


def cmd_fqn_build(args) -> int:
    try:
        b = fq.FqnBuilder(fq.Scope(args.scope))
        if args.agent is not None:
            b.agent(args.agent or None)
        if args.component:
            b.component(args.component)
        if args.stream:
            b.stream(args.stream)
        b.resource(args.resource, kind=_KINDS[args.kind])
        name = b.build()
    except fq.FqnError as exc:
        return _fail(str(exc))
    if args.dds:
        dds_kind = fq.DdsKind.TOPIC if args.kind == "topic" else fq.DdsKind.SERVICE_REQUEST
        name = fq.to_dds_name(name, dds_kind)
    print(name)
    return EXIT_OK


def cmd_traj_sample(args) -> int:
    try:
        trajectories = deserialize_scene(Path(args.scene).read_text())
        traj = find(trajectories, args.name)
    except OSError as exc:
        return _fail(f"cannot read scene: {exc}")
    except SchemaError as exc:
        return _fail(f"invalid scene: {exc}")
    except KeyError:
        return _fail(f"no trajectory named {args.name!r}")
    pos, quat = sample(traj, args.t)
    print(json.dumps({"name": traj.name, "frame": traj.frame, "t": args.t,
                      "position": list(pos), "orientation_wxyz": list(quat)}))
    return EXIT_OK


def cmd_codec_roundtrip(args) -> int:
    try:
        frame = rvl.read_frame(args.input)
    except OSError as exc:
        return _fail(f"cannot read frame: {exc}")
    except CorruptStream as exc:
        return _fail(f"bad frame file: {exc}")
    blob = rvl.rvl_compress(frame)
    try:
        back = rvl.rvl_decompress(blob)
    except CorruptStream as exc:
        return _fail(f"decode failed: {exc}")
    ok = back == frame
    print(json.dumps({
        "width": frame.width, "height": frame.height, "raw_bytes": frame.raw_size,
        "compressed_bytes": blob.nbytes, "ratio": blob.nbytes / frame.raw_size if frame.raw_size else 0.0,
        "identical": ok, "backend": rvl.BACKEND,
    }))
    return EXIT_OK if ok else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fleetsim", description="Fleet communication simulator and tools.")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("sim", help="run a benchmark experiment")
    sim.add_argument("experiment", choices=sorted(EXPERIMENTS))
    sim.add_argument("--scenario", help="YAML scenario file (defaults apply when omitted)")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", help="metrics CSV path")
    sim.add_argument("--summary", help="also write the JSON summary here")
    sim.set_defaults(func=cmd_sim)

    fqn = sub.add_parser("fqn", help="validate or build names")
    fsub = fqn.add_subparsers(dest="fqn_command", required=True)
    check = fsub.add_parser("check", help="parse a name and print its tuple")
    check.add_argument("name")
    check.add_argument("--kind", choices=sorted(_KINDS))
    check.set_defaults(func=cmd_fqn_check)
    build = fsub.add_parser("build", help="build a name from segments")
    build.add_argument("--scope", choices=[s.value for s in fq.Scope], required=True)
    build.add_argument("--agent", nargs="?", const="",
                       help=f"agent segment; bare flag resolves ${fq.AGENT_ENV_VAR} or the hostname")
    build.add_argument("--component")
    build.add_argument("--stream")
    build.add_argument("--resource", required=True)
    build.add_argument("--kind", choices=sorted(_KINDS), default="topic")
    build.add_argument("--dds", action="store_true", help="print the DDS-level name")
    build.set_defaults(func=cmd_fqn_build)

    traj = sub.add_parser("traj", help="trajectory tools")
    tsub = traj.add_subparsers(dest="traj_command", required=True)
    samp = tsub.add_parser("sample", help="pose of a trajectory at time t")
    samp.add_argument("--scene", required=True)
    samp.add_argument("--name", required=True)
    samp.add_argument("--t", type=float, required=True)
    samp.set_defaults(func=cmd_traj_sample)

    codec = sub.add_parser("codec", help="depth codec tools")
    csub = codec.add_subparsers(dest="codec_command", required=True)
    rt = csub.add_parser("roundtrip", help="compress and decompress a frame file")
    rt.add_argument("--in", dest="input", required=True)
    rt.set_defaults(func=cmd_codec_roundtrip)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
