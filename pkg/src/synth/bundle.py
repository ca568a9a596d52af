import json
from pathlib import Path
from typing import Dict, List

from .generate import SynthBundle
from ..alignment.target import write_observations
from ..depth.depth_log import write_depth_log
from ..geometry.trajectory import write_trajectory
from ..skeleton.pointcloud import write_ply
from ..survey.network import format_closures, format_shots
from ..utils.storage import write_json_report
from ..utils.tabular import write_text

AREA_RADII_M = (2.5, 5.0)


def _toml_value(value) -> str:
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _table(name: str, values: Dict[str, object], array: bool = False) -> List[str]:
    lines = [f"[[{name}]]" if array else f"[{name}]"]
    lines += [f"{key} = {_toml_value(value)}" for key, value in values.items()]
    lines.append("")
    return lines


def pipeline_config_text(bundle: SynthBundle) -> str:
    """A pipeline configuration that runs every step over the bundle's files, relative to its directory."""
    spec = bundle.spec
    reference = str(bundle.ground_truth["reference_camera"])
    duration = float(bundle.ground_truth["duration_s"])
    keyframe_spacing = 1.0 / spec.keyframe_rate

    lines = ["# Generated by spelaeo synth", ""]
    lines += _table("skeleton", {"center_index": list(spec.camera_ids).index(reference)})
    lines += _table("survey", {"declination": float(spec.declination), "anchor": "S0"})
    lines += _table("area", {"time_tolerance": keyframe_spacing})
    lines += _table("synth", {"seed": spec.seed})
    lines += _table("pipeline", {
        "out_dir": "out",
        "reference": reference,
        "center": reference,
        "shots": "shots.csv",
        "closures": "closures.csv",
    })
    for camera in spec.camera_ids:
        lines += _table("pipeline.datasets", {
            "name": camera,
            "trajectory": f"traj_{camera}.csv",
            "depth_log": "depth.csv",
            "observations": f"obs_{camera}.csv",
            "cloud": f"cloud_{camera}.ply",
        }, array=True)
    # Area centres sit on keyframes of the dive clock.
    middle = round(duration * spec.keyframe_rate / 2.0) * keyframe_spacing
    for index, radius in enumerate(AREA_RADII_M, start=1):
        lines += _table("pipeline.areas", {
            "name": f"area{index}",
            "center_time": float(middle),
            "radius": radius,
        }, array=True)
    return "\n".join(lines)


def write_bundle(bundle: SynthBundle, out_dir: Path) -> Dict[str, str]:
    """
    Write every artifact of a bundle into ``out_dir``.

    Returns:
        Mapping of artifact name to written path, in a fixed order
    """
    out_dir = Path(out_dir)
    written: Dict[str, str] = {}
    for camera in bundle.spec.camera_ids:
        written[f"traj_{camera}"] = write_trajectory(bundle.trajectories[camera], out_dir / f"traj_{camera}.csv")
        written[f"obs_{camera}"] = write_observations(bundle.observations[camera], out_dir / f"obs_{camera}.csv")
        written[f"cloud_{camera}"] = write_ply(bundle.clouds[camera], out_dir / f"cloud_{camera}.ply")
    written["depth"] = write_depth_log(bundle.depth_log, out_dir / "depth.csv")
    written["shots"] = write_text(out_dir / "shots.csv", format_shots(bundle.survey_shots))
    written["closures"] = write_text(out_dir / "closures.csv", format_closures(bundle.survey.closures))
    written["walls"] = write_ply(bundle.walls, out_dir / "walls.ply")
    written["ground_truth"] = write_json_report(out_dir / "ground_truth.json", bundle.ground_truth)
    written["pipeline"] = write_text(out_dir / "pipeline.toml", pipeline_config_text(bundle))
    return written
