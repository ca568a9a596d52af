"""
File-level pipeline steps shared by the command line and the tool server.

Each step reads its inputs from disk, runs the in-memory operation, writes
its declared outputs and returns a JSON-serializable summary.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from ..alignment.target import (
    FrameTransform,
    TargetObservation,
    apply_frame_transform,
    estimate_frame_transform,
    estimate_target,
    load_observations,
    shift_observations,
)
from ..depth.depth_log import DepthLog, load_depth_log
from ..depth.fusion import DepthCorrection, fuse
from ..depth.plots import plot_depth_fusion
from ..geometry.pose import Pose
from ..geometry.trajectory import Trajectory, load_trajectory, write_trajectory
from ..recon.area import area_report, select_keyframes, write_manifest
from ..skeleton.export import skeleton_report, write_skeleton
from ..skeleton.lrud import build_skeleton
from ..skeleton.plots import plot_skeleton
from ..skeleton.pointcloud import (
    PointCloud,
    correct_cloud_depth,
    load_ply,
    merge_clouds,
    transform_cloud,
    write_ply,
)
from ..survey.adjust import adjust_loops, dead_reckon, format_stations, stick_map_report
from ..survey.network import load_survey
from ..survey.stickmap import write_stickmap
from ..synth.bundle import write_bundle
from ..synth.corridor import load_corridor_spec
from ..synth.generate import generate
from ..utils.config import (
    AlignSettings,
    AreaSettings,
    DatasetEntry,
    DepthSettings,
    PipelineConfig,
    SkeletonSettings,
)
from ..utils.errors import InvalidParameter
from ..utils.logging import get_logger, log_step, log_step_result
from ..utils.plotting import save_svg
from ..utils.storage import write_json_report
from ..utils.tabular import write_text

logger = get_logger(__name__)


def _relative(path: str, root: Path) -> str:
    try:
        return Path(path).resolve().relative_to(Path(root).resolve()).as_posix()
    except ValueError:
        return Path(path).as_posix()


def fuse_depth_files(
    trajectory: Path,
    depth_log: Path,
    out: Path,
    report: Optional[Path] = None,
    plot: Optional[Path] = None,
    settings: DepthSettings = DepthSettings(),
) -> Dict[str, object]:
    """Depth-correct one trajectory file against a dive-computer log."""
    log_step(logger, "fuse-depth", {"trajectory": str(trajectory), "depth_log": str(depth_log)})
    traj = load_trajectory(trajectory)
    log = load_depth_log(depth_log, settings.nominal_spacing)
    corrected, corr = fuse(traj, log, settings.rate, settings.max_shift, settings.min_overlap)

    outputs = {"trajectory": write_trajectory(corrected, out)}
    summary = {"frame_id": corrected.frame_id, "keyframes": len(corrected), **corr.as_report()}
    if report is not None:
        outputs["report"] = write_json_report(report, summary)
    if plot is not None:
        outputs["plot"] = save_svg(plot_depth_fusion(traj, corrected, log, corr), plot)
    log_step_result(logger, "fuse-depth", True, **corr.as_report())
    return {**summary, "outputs": outputs}


def align_files(
    ref: Path,
    ref_obs: Path,
    mov: Path,
    mov_obs: Path,
    out: Path,
    report: Optional[Path] = None,
    settings: AlignSettings = AlignSettings(),
) -> Dict[str, object]:
    """Bring a moving trajectory into the reference trajectory's frame via the shared target."""
    log_step(logger, "align", {"ref": str(ref), "mov": str(mov)})
    ref_traj, mov_traj = load_trajectory(ref), load_trajectory(mov)
    est_ref = estimate_target(ref_traj, load_observations(ref_obs, ref_traj.camera_id), settings.association_tolerance)
    est_mov = estimate_target(mov_traj, load_observations(mov_obs, mov_traj.camera_id), settings.association_tolerance)
    ft = estimate_frame_transform(est_ref, est_mov)
    aligned = apply_frame_transform(mov_traj, ft)

    summary = {
        "reference": est_ref.as_report(),
        "moving": est_mov.as_report(),
        "frame_transform": ft.as_report(),
    }
    outputs = {"trajectory": write_trajectory(aligned, out)}
    if report is not None:
        outputs["report"] = write_json_report(report, summary)
    log_step_result(logger, "align", True, inliers_ref=est_ref.inlier_count, inliers_mov=est_mov.inlier_count)
    return {**summary, "outputs": outputs}


def skeleton_files(
    trajectories: Sequence[Path],
    cloud: Optional[Path],
    out_dir: Path,
    settings: SkeletonSettings = SkeletonSettings(),
    plot: Optional[Path] = None,
) -> Dict[str, object]:
    """Build the cave skeleton from aligned trajectory files and a fused cloud."""
    log_step(logger, "skeleton", {"trajectories": [str(t) for t in trajectories], "cloud": str(cloud)})
    trajs = [load_trajectory(path) for path in trajectories]
    point_cloud = load_ply(cloud) if cloud is not None else PointCloud.empty()
    skel = build_skeleton(trajs, point_cloud, settings)
    outputs = write_skeleton(skel, out_dir)
    if plot is not None:
        outputs["plot"] = save_svg(plot_skeleton(skel, point_cloud), plot)
    log_step_result(logger, "skeleton", True, nodes=len(skel.nodes), edges=len(skel.edges))
    report = skeleton_report(skel)
    return {"node_count": report["node_count"], "edge_count": report["edge_count"], "profile": report["profile"], "outputs": outputs}


def _center_pose(center: Trajectory, center_time: float, tolerance: float) -> Pose:
    return center.samples[center.index_near(center_time, tolerance)].pose


def select_area_files(
    trajectories: Sequence[Path],
    center_trajectory: Path,
    center_time: float,
    out: Path,
    radius: Optional[float] = None,
    settings: AreaSettings = AreaSettings(),
) -> Dict[str, object]:
    """Select keyframes around the center trajectory's keyframe nearest ``center_time`` and export a manifest."""
    radius = settings.radius if radius is None else radius
    log_step(logger, "select-area", {"center_time": center_time, "radius_m": radius})
    trajs = [load_trajectory(path) for path in trajectories]
    center = _center_pose(load_trajectory(center_trajectory), center_time, settings.time_tolerance)
    selection = select_keyframes(trajs, center, radius)
    path = write_manifest(selection, out, settings.image_pattern)
    log_step_result(logger, "select-area", True, members=len(selection.members))
    return {**area_report(selection), "outputs": {"manifest": path}}


def survey_adjust_files(
    shots: Path,
    out: Path,
    closures: Optional[Path] = None,
    anchor: Optional[str] = None,
    declination: float = 0.0,
    svg: Optional[Path] = None,
    report: Optional[Path] = None,
) -> Dict[str, object]:
    """Least-squares adjust a survey and write station coordinates."""
    log_step(logger, "survey-adjust", {"shots": str(shots), "closures": str(closures), "anchor": anchor})
    net = load_survey(shots, closures, declination)
    raw = dead_reckon(net, anchor)
    adjusted = adjust_loops(net, anchor)
    summary = stick_map_report(net, adjusted)
    summary["dead_reckoning"] = stick_map_report(net, raw)

    outputs = {"stations": write_text(out, format_stations(adjusted))}
    if svg is not None:
        outputs["svg"] = write_stickmap(adjusted, net, svg)
    if report is not None:
        outputs["report"] = write_json_report(report, summary)
    log_step_result(logger, "survey-adjust", True, weighted_misfit=summary["weighted_misfit"])
    return {**summary, "outputs": outputs}


def survey_stickmap_files(
    shots: Path,
    svg: Path,
    closures: Optional[Path] = None,
    anchor: Optional[str] = None,
    declination: float = 0.0,
    adjusted: bool = True,
) -> Dict[str, object]:
    """Render a plan-view stick map, adjusted or straight from dead reckoning."""
    log_step(logger, "survey-stickmap", {"shots": str(shots), "adjusted": adjusted})
    net = load_survey(shots, closures, declination)
    stick_map = adjust_loops(net, anchor) if adjusted else dead_reckon(net, anchor)
    path = write_stickmap(stick_map, net, svg)
    log_step_result(logger, "survey-stickmap", True, stations=len(stick_map.coordinates))
    return {"method": stick_map.method, "stations": len(stick_map.coordinates), "outputs": {"svg": path}}


def synth_files(spec: Optional[Path], out_dir: Path, seed: Optional[int] = None) -> Dict[str, object]:
    """Generate a synthetic bundle and write it to ``out_dir``."""
    log_step(logger, "synth", {"spec": str(spec), "seed": seed})
    bundle = generate(load_corridor_spec(spec, seed))
    outputs = write_bundle(bundle, out_dir)
    log_step_result(logger, "synth", True, files=len(outputs))
    return {"seed": bundle.spec.seed, "keyframes": bundle.ground_truth["keyframes"], "outputs": outputs}


@dataclass(frozen=True, eq=False)
class _FusedDataset:
    entry: DatasetEntry
    raw: Trajectory
    trajectory: Trajectory
    correction: DepthCorrection
    observations: List[TargetObservation]
    cloud: PointCloud
    depth_log: DepthLog


def _fuse_dataset(entry: DatasetEntry, settings: DepthSettings) -> _FusedDataset:
    raw = load_trajectory(entry.trajectory)
    log = load_depth_log(entry.depth_log, settings.nominal_spacing)
    corrected, corr = fuse(raw, log, settings.rate, settings.max_shift, settings.min_overlap)
    observations = shift_observations(load_observations(entry.observations, raw.camera_id), corr.time_shift)
    cloud = correct_cloud_depth(load_ply(entry.cloud), corr) if entry.cloud is not None else PointCloud.empty()
    return _FusedDataset(entry, raw, corrected, corr, observations, cloud, log)


def run_pipeline(cfg: PipelineConfig) -> Dict[str, object]:
    """
    Chain fuse-depth, align, skeleton, select-area and (when shots are configured) the survey.

    Datasets may be fused concurrently; results are gathered and written in
    configuration order so the output tree is identical for any worker count.
    """
    settings = cfg.pipeline
    if not settings.datasets:
        raise InvalidParameter("pipeline has no datasets")
    out_dir = Path(settings.out_dir)
    names = [d.name for d in settings.datasets]
    reference = settings.reference or names[0]
    start = time.time()
    log_step(logger, "pipeline", {"datasets": names, "reference": reference, "workers": settings.workers})

    # fuse-depth
    if settings.workers > 1:
        with ThreadPoolExecutor(max_workers=settings.workers) as pool:
            fused = list(pool.map(lambda d: _fuse_dataset(d, cfg.depth), settings.datasets))
    else:
        fused = [_fuse_dataset(d, cfg.depth) for d in settings.datasets]

    written: Dict[str, str] = {}
    corrections = {}
    for item in fused:
        name = item.entry.name
        corrections[name] = item.correction.as_report()
        written[f"{name}/trajectory_corrected"] = write_trajectory(item.trajectory, out_dir / name / "trajectory_corrected.csv")
        written[f"{name}/depth_correction"] = write_json_report(out_dir / name / "depth_correction.json", item.correction.as_report())
        written[f"{name}/depth_fusion"] = save_svg(
            plot_depth_fusion(item.raw, item.trajectory, item.depth_log, item.correction),
            out_dir / name / "depth_fusion.svg",
        )

    # align
    by_name = {item.entry.name: item for item in fused}
    ref = by_name[reference]
    ref_estimate = estimate_target(ref.trajectory, ref.observations, cfg.align.association_tolerance)
    aligned_trajs: List[Trajectory] = []
    aligned_clouds: List[PointCloud] = []
    alignment = {}
    for item in fused:
        name = item.entry.name
        if name == reference:
            trajectory, cloud = item.trajectory, item.cloud
            alignment[name] = {"reference": True, "target": ref_estimate.as_report()}
        else:
            estimate = estimate_target(item.trajectory, item.observations, cfg.align.association_tolerance)
            ft: FrameTransform = estimate_frame_transform(ref_estimate, estimate)
            trajectory = apply_frame_transform(item.trajectory, ft)
            cloud = transform_cloud(item.cloud, ft)
            alignment[name] = {"reference": False, "target": estimate.as_report(), "frame_transform": ft.as_report()}
        aligned_trajs.append(trajectory)
        aligned_clouds.append(cloud)
        written[f"{name}/trajectory_aligned"] = write_trajectory(trajectory, out_dir / name / "trajectory_aligned.csv")
    written["alignment"] = write_json_report(out_dir / "alignment.json", alignment)

    # skeleton
    fused_cloud = merge_clouds(aligned_clouds)
    written["cloud_fused"] = write_ply(fused_cloud, out_dir / "cloud_fused.ply")
    center_name = settings.center or names[min(cfg.skeleton.center_index, len(names) - 1)]
    center_index = names.index(center_name)
    skeleton_settings = SkeletonSettings(
        center_index=center_index,
        flag_radius=cfg.skeleton.flag_radius,
        depth_tol=cfg.skeleton.depth_tol,
        lateral_radius=cfg.skeleton.lateral_radius,
    )
    skel = build_skeleton(aligned_trajs, fused_cloud, skeleton_settings)
    for key, path in write_skeleton(skel, out_dir / "skeleton").items():
        written[f"skeleton/{key}"] = path
    written["skeleton/plot"] = save_svg(plot_skeleton(skel, fused_cloud), out_dir / "skeleton" / "skeleton.svg")

    # select-area
    areas = {}
    for area in settings.areas:
        center = _center_pose(aligned_trajs[center_index], area.center_time, cfg.area.time_tolerance)
        radius = area.radius if area.radius is not None else cfg.area.radius
        selection = select_keyframes(aligned_trajs, center, radius)
        written[f"areas/{area.name}"] = write_manifest(selection, out_dir / "areas" / f"{area.name}.csv", cfg.area.image_pattern)
        areas[area.name] = area_report(selection, area.name)

    # survey
    survey = None
    if settings.shots is not None:
        net = load_survey(settings.shots, settings.closures, cfg.survey.declination)
        adjusted = adjust_loops(net, cfg.survey.anchor)
        survey = stick_map_report(net, adjusted)
        survey["dead_reckoning"] = stick_map_report(net, dead_reckon(net, cfg.survey.anchor))
        written["survey/stations"] = write_text(out_dir / "survey" / "stations.csv", format_stations(adjusted))
        written["survey/stickmap"] = write_stickmap(adjusted, net, out_dir / "survey" / "stickmap.svg")
        written["survey/report"] = write_json_report(out_dir / "survey" / "survey.json", survey)

    summary = {
        "datasets": names,
        "reference": reference,
        "center": center_name,
        "depth_corrections": corrections,
        "skeleton": {
            "node_count": len(skel.nodes),
            "edge_count": len(skel.edges),
            "cloud_points": len(fused_cloud),
        },
        "areas": areas,
        "survey": survey,
        "outputs": sorted(_relative(path, out_dir) for path in written.values()),
    }
    written["pipeline"] = write_json_report(out_dir / "pipeline.json", summary)
    log_step_result(
        logger,
        "pipeline",
        True,
        execution_time_ms=round((time.time() - start) * 1000, 2),
        outputs=len(written),
    )
    return {**summary, "out_dir": str(out_dir)}
