import json

import numpy as np
import pytest

from src import __version__
from src.cli import run
from src.geometry import Pose
from src.utils.config import load_pipeline_config

CORRIDOR_SPEC = """\
# 15 m legs put the bend on the 10 s depth-log grid
waypoints = [[0.0, 0.0, 10.0], [14.0, 2.0, 15.0], [28.0, 7.0, 13.0]]
wall_density = 5.0
time_shift = 40.0
z_sign = -1
depth_offset = 19.4
misalign_yaw_deg = [10.0, 0.0, -20.0]
misalign_xy = [[1.0, 2.0], [0.0, 0.0], [-3.0, 0.5]]
target_position = [3.0, 0.5, 10.9]
"""

TRIANGLE_SHOTS = (
    "from,to,length_m,azimuth_in_deg,azimuth_out_deg,depth_from_m,depth_to_m\n"
    "A,B,10.0,90.0,90.0,5.0,5.0\n"
    "B,C,10.0,0.0,0.0,5.0,5.0\n"
    "C,A,14.142135623730951,225.0,225.0,5.0,5.0\n"
)


def snapshot(directory):
    return {p.relative_to(directory).as_posix(): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    root = tmp_path_factory.mktemp("bundle")
    spec = root / "corridor.toml"
    spec.write_text(CORRIDOR_SPEC)
    assert run(["--quiet", "synth", "--spec", str(spec), "--out-dir", str(root / "data"), "--seed", "3"]) == 0
    return root / "data"


@pytest.fixture(scope="module")
def pipeline_out(bundle):
    assert run(["--quiet", "--config", str(bundle / "pipeline.toml"), "pipeline"]) == 0
    return bundle / "out"


def test_synth_writes_bundle(bundle):
    truth = json.loads((bundle / "ground_truth.json").read_text())
    assert truth["seed"] == 3
    assert (bundle / "traj_center.csv").read_text().startswith("# frame_id=center:slam")
    cfg = load_pipeline_config(bundle / "pipeline.toml")
    assert [d.name for d in cfg.pipeline.datasets] == ["left", "center", "right"]
    assert cfg.pipeline.datasets[0].trajectory == bundle / "traj_left.csv"


def test_pipeline_recovers_injected_distortions(bundle, pipeline_out):
    summary = json.loads((pipeline_out / "pipeline.json").read_text())
    for name, corr in summary["depth_corrections"].items():
        assert corr["time_shift_s"] == pytest.approx(40.0, abs=0.05), name
        assert corr["scale"] == pytest.approx(-1.0, abs=0.01), name
        assert corr["offset_m"] == pytest.approx(19.4, abs=0.05), name

    truth = json.loads((bundle / "ground_truth.json").read_text())
    alignment = json.loads((pipeline_out / "alignment.json").read_text())
    assert alignment["center"]["reference"] is True
    for camera in ("left", "right"):
        estimated = Pose.from_row(alignment[camera]["frame_transform"]["transform"])
        expected = Pose.from_row(truth["cameras"][camera]["to_reference"])
        np.testing.assert_allclose(estimated.t, expected.t, atol=0.05)
        assert estimated.allclose(Pose(estimated.t, expected.q), atol=1e-3)

    skeleton = summary["skeleton"]
    assert skeleton["edge_count"] == skeleton["node_count"] - 1
    assert summary["areas"]["area1"]["members"] <= summary["areas"]["area2"]["members"]
    assert summary["survey"]["stations"] >= 2


def test_pipeline_lists_relative_outputs(pipeline_out):
    summary = json.loads((pipeline_out / "pipeline.json").read_text())
    for relative in summary["outputs"]:
        assert not relative.startswith("/")
        assert (pipeline_out / relative).is_file()
    for expected in ("skeleton/lrud.csv", "areas/area1.csv", "survey/stations.csv", "center/trajectory_aligned.csv"):
        assert expected in summary["outputs"]


def test_pipeline_output_does_not_depend_on_workers(bundle, pipeline_out):
    before = snapshot(pipeline_out)
    assert run(["--quiet", "--config", str(bundle / "pipeline.toml"), "pipeline", "--workers", "3"]) == 0
    assert snapshot(pipeline_out) == before


def test_survey_adjust_command(tmp_path):
    shots = tmp_path / "shots.csv"
    shots.write_text(TRIANGLE_SHOTS)
    code = run([
        "survey", "adjust", "--shots", str(shots), "--out", str(tmp_path / "stations.csv"),
        "--svg", str(tmp_path / "map.svg"), "--report", str(tmp_path / "survey.json"), "--anchor", "B",
    ])
    assert code == 0
    assert "# anchor=B" in (tmp_path / "stations.csv").read_text()
    assert json.loads((tmp_path / "survey.json").read_text())["anchor"] == "B"
    assert 'id="station-B"' in (tmp_path / "map.svg").read_text()


def test_version(capsys):
    assert run(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


@pytest.mark.parametrize("argv", [["frobnicate"], ["survey"], ["synth"], ["pipeline"]])
def test_usage_errors_exit_1(argv, tmp_path):
    if argv == ["synth"]:
        argv = ["synth", "--seed", "x", "--out-dir", str(tmp_path)]
    assert run(argv) == 1


def test_bad_configuration_exits_1(tmp_path):
    config = tmp_path / "bad.toml"
    config.write_text("[depth]\nrate = -1.0\n")
    assert run(["--config", str(config), "synth", "--out-dir", str(tmp_path / "x")]) == 1
    assert run(["--config", str(tmp_path / "missing.toml"), "synth", "--out-dir", str(tmp_path / "x")]) == 1

    shots = tmp_path / "shots.csv"
    shots.write_text(TRIANGLE_SHOTS)
    assert run(["survey", "adjust", "--shots", str(shots), "--out", str(tmp_path / "s.csv"), "--declination", "500"]) == 1


def test_bad_data_exits_2(tmp_path):
    shots = tmp_path / "shots.csv"
    shots.write_text(TRIANGLE_SHOTS.replace("90.0,90.0", "400.0,90.0"))
    assert run(["survey", "adjust", "--shots", str(shots), "--out", str(tmp_path / "s.csv")]) == 2
    assert not (tmp_path / "s.csv").exists()
    assert run(["survey", "adjust", "--shots", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "s.csv")]) == 2


def test_flat_trajectory_exits_3(tmp_path):
    trajectory = tmp_path / "flat.csv"
    rows = [f"{0.25 * i},{0.01 * i},0.0,1.0,0.0,0.0,0.0,1.0" for i in range(241)]
    trajectory.write_text("timestamp_s,tx,ty,tz,qx,qy,qz,qw\n" + "\n".join(rows) + "\n")
    depth_log = tmp_path / "depth.csv"
    depth_log.write_text("timestamp_s,depth_m\n" + "".join(f"{10 * k},{5.0 + (k % 4)}\n" for k in range(11)))
    code = run(["fuse-depth", "--trajectory", str(trajectory), "--depth-log", str(depth_log), "--out", str(tmp_path / "out.csv")])
    assert code == 3
