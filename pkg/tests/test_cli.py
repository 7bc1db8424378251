from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from fleetsim.codecs.rvl import DepthFrame, write_frame
from fleetsim.harness.cli import main
from fleetsim.trajectory import Trajectory, Waypoint, serialize_scene


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_fqn_check_ok(capsys):
    code, out, _ = run(capsys, "fqn", "check", "/global/agent_heartbeat")
    assert code == 0
    assert json.loads(out) == {"scope": "global", "agent": None, "component": None, "stream": None,
                               "resource": "agent_heartbeat", "kind": "topic"}


def test_fqn_check_bad(capsys):
    code, _, err = run(capsys, "fqn", "check", "/global//x")
    assert code == 1 and "empty segment" in err


def test_fqn_check_kind(capsys):
    code, _, _ = run(capsys, "fqn", "check", "/local/go2/camera/depth/reset", "--kind", "service")
    assert code == 1


def test_fqn_build(capsys):
    code, out, _ = run(capsys, "fqn", "build", "--scope", "global", "--agent", "go2", "--resource", "get_metadata",
                       "--kind", "service", "--dds")
    assert code == 0 and out.strip() == "rq/global/go2/get_metadata"


def test_fqn_build_agent_from_env(capsys, monkeypatch):
    monkeypatch.setenv("SFG_AGENT_NAME", "Go-2")
    code, out, _ = run(capsys, "fqn", "build", "--scope", "local", "--agent", "--resource", "agent_discovery_event")
    assert code == 0 and out.strip() == "/local/go_2/agent_discovery_event"


def test_fqn_build_rejects_mask(capsys):
    code, _, err = run(capsys, "fqn", "build", "--scope", "local", "--agent", "go2", "--component", "camera",
                       "--stream", "depth", "--resource", "reset", "--kind", "service")
    assert code == 1 and "not permitted" in err


def test_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["nonsense"])
    assert info.value.code == 2


def test_traj_sample(tmp_path, capsys):
    scene = tmp_path / "scene.yaml"
    scene.write_text(serialize_scene([Trajectory("patrol", (Waypoint((0, 0, 0), 0.0), Waypoint((2, 0, 0), 4.0)))]))
    code, out, _ = run(capsys, "traj", "sample", "--scene", str(scene), "--name", "patrol", "--t", "1")
    assert code == 0
    assert json.loads(out)["position"] == [0.5, 0.0, 0.0]
    code, _, _ = run(capsys, "traj", "sample", "--scene", str(scene), "--name", "other", "--t", "1")
    assert code == 1
    code, _, _ = run(capsys, "traj", "sample", "--scene", str(tmp_path / "none.yaml"), "--name", "x", "--t", "1")
    assert code == 1


def test_codec_roundtrip(tmp_path, capsys):
    path = tmp_path / "frame.bin"
    write_frame(path, DepthFrame(3, 2, np.array([0, 0, 5, 6, 0, 9])))
    code, out, _ = run(capsys, "codec", "roundtrip", "--in", str(path))
    doc = json.loads(out)
    assert code == 0 and doc["identical"] and doc["raw_bytes"] == 12
    path.write_bytes(b"\x01")
    assert run(capsys, "codec", "roundtrip", "--in", str(path))[0] == 1


def test_sim_writes_outputs(tmp_path, capsys):
    scenario = tmp_path / "s.yaml"
    scenario.write_text("mode: baseline\nsamples: 2\n")
    out_csv, out_json = tmp_path / "m.csv", tmp_path / "m.json"
    code, out, _ = run(capsys, "sim", "e3", "--scenario", str(scenario), "--seed", "4",
                       "--out", str(out_csv), "--summary", str(out_json))
    assert code == 0
    assert out_csv.read_text().startswith("t_ms,agent,metric,value\n")
    assert json.loads(out_json.read_text()) == json.loads(out)


def test_sim_bad_scenario(tmp_path, capsys):
    scenario = tmp_path / "s.yaml"
    scenario.write_text("unknown: 1\n")
    assert run(capsys, "sim", "e1", "--scenario", str(scenario))[0] == 1


def test_module_entry_point(tmp_path):
    cmd = [sys.executable, "-m", "fleetsim.harness.cli", "fqn", "check", "/global/go2/get_metadata"]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["kind"] == "service"
