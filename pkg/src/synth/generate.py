"""
Synthetic cave bundle generator.

Every injected distortion is recorded in the ground-truth block so recovery
can be asserted downstream. Random draws come from a NumPy Generator over
PCG64 seeded with ``spec.seed``, in a fixed order.
"""

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from .corridor import CorridorSpec
from ..alignment.target import TargetObservation
from ..depth.depth_log import DepthLog
from ..geometry.pose import EulerAngles, Pose, compose, invert, pose_from_euler
from ..geometry.trajectory import Trajectory
from ..skeleton.pointcloud import PointCloud
from ..survey.network import SurveyNetwork, SurveySegment, apply_declination
from ..utils.logging import get_logger

logger = get_logger(__name__)

OUTLIER_SHIFT_M = (1.0, 2.0)
OUTLIER_ROTATION_DEG = (20.0, 40.0)


@dataclass(frozen=True, eq=False)
class SynthBundle:
    spec: CorridorSpec
    centerline: np.ndarray
    walls: PointCloud
    trajectories: Dict[str, Trajectory]
    clouds: Dict[str, PointCloud]
    observations: Dict[str, List[TargetObservation]]
    depth_log: DepthLog
    survey: SurveyNetwork
    survey_shots: Tuple[SurveySegment, ...]
    ground_truth: Dict[str, object]


class _Path:
    """Arc-length parametrisation of the waypoint polyline."""

    def __init__(self, waypoints: np.ndarray):
        self.points = waypoints
        steps = np.linalg.norm(np.diff(waypoints, axis=0), axis=1)
        self.arc = np.concatenate([[0.0], np.cumsum(steps)])
        self.length = float(self.arc[-1])

    def segment_of(self, s: np.ndarray) -> np.ndarray:
        return np.clip(np.searchsorted(self.arc, s, side="right") - 1, 0, len(self.points) - 2)

    def position(self, s: np.ndarray) -> np.ndarray:
        return np.stack([np.interp(s, self.arc, self.points[:, k]) for k in range(3)], axis=-1)

    def heading(self, s: np.ndarray) -> np.ndarray:
        """Unit horizontal direction (x, y) of the segment containing each s."""
        seg = self.segment_of(s)
        delta = self.points[seg + 1, :2] - self.points[seg, :2]
        return delta / np.linalg.norm(delta, axis=-1, keepdims=True)


def _yaw_pose(yaw_deg: float, xy: Tuple[float, float]) -> Pose:
    return pose_from_euler((xy[0], xy[1], 0.0), EulerAngles(0.0, 0.0, math.radians(yaw_deg)))


def _random_direction(rng: np.random.Generator) -> np.ndarray:
    direction = rng.normal(size=3)
    return direction / np.linalg.norm(direction)


def _random_rotation(rng: np.random.Generator, sigma_deg: float) -> Rotation:
    """Rotation about a uniform random axis; sigma_deg is the spread of the total angle."""
    return Rotation.from_rotvec(_random_direction(rng) * rng.normal(0.0, math.radians(sigma_deg)))


def _to_slam(point_world: np.ndarray, misalignment: Pose, spec: CorridorSpec) -> np.ndarray:
    """Yaw/xy misalignment, then the depth offset and z sign of the SLAM vertical axis."""
    p = misalignment.transform_points(point_world)
    p[:, 2] = spec.z_sign * (p[:, 2] - spec.depth_offset)
    return p


def _walls(spec: CorridorSpec, path: _Path, rng: np.random.Generator) -> np.ndarray:
    faces = []
    for i in range(len(path.points) - 1):
        a, b = path.points[i], path.points[i + 1]
        horizontal = b[:2] - a[:2]
        run = float(np.linalg.norm(horizontal))
        u = horizontal / run
        right = np.array([u[1], -u[0]])
        for face, across in (("left", spec.height), ("right", spec.height), ("up", spec.width), ("down", spec.width)):
            count = int(round(spec.wall_density * run * across))
            if count == 0:
                continue
            along = rng.uniform(0.0, 1.0, count)
            offset = rng.uniform(-0.5, 0.5, count) * across
            noise = rng.normal(0.0, spec.wall_noise, count) if spec.wall_noise > 0 else np.zeros(count)
            axis = a[None, :] + along[:, None] * (b - a)[None, :]
            points = axis.copy()
            if face in ("left", "right"):
                side = -1.0 if face == "left" else 1.0
                lateral = side * (spec.width / 2.0 + noise)
                points[:, :2] += lateral[:, None] * right[None, :]
                points[:, 2] += offset
            else:
                side = -1.0 if face == "up" else 1.0
                points[:, :2] += offset[:, None] * right[None, :]
                points[:, 2] += side * (spec.height / 2.0 + noise)
            faces.append(points)
    return np.concatenate(faces, axis=0) if faces else np.zeros((0, 3))


def _camera_world_poses(spec: CorridorSpec, path: _Path, arc: np.ndarray) -> Dict[str, List[Pose]]:
    axis = path.position(arc)
    heading = path.heading(arc)
    right = np.stack([heading[:, 1], -heading[:, 0], np.zeros(len(arc))], axis=-1)
    yaw = np.arctan2(heading[:, 1], heading[:, 0])

    poses: Dict[str, List[Pose]] = {}
    for index, camera in enumerate(spec.camera_ids):
        positions = axis + spec.camera_lateral_offsets[index] * right
        pitch = math.radians(spec.center_pitch_deg) if camera == spec.center_camera else 0.0
        yaw_offset = math.radians(spec.camera_yaw_offsets_deg[index])
        poses[camera] = [
            pose_from_euler(p, EulerAngles(0.0, pitch, float(y) + yaw_offset))
            for p, y in zip(positions, yaw)
        ]
    return poses


def _perturb(pose: Pose, rng: np.random.Generator, sigma_t: float, sigma_deg: float) -> Pose:
    """Displace along a random direction and rotate about a random axis, both by N(0, sigma) amounts."""
    shift = _random_direction(rng) * rng.normal(0.0, sigma_t) if sigma_t > 0 else np.zeros(3)
    rotation = _random_rotation(rng, sigma_deg) if sigma_deg > 0 else Rotation.identity()
    return Pose.from_rotation(rotation * pose.rotation, pose.t + shift)


def _outlier(pose: Pose, rng: np.random.Generator) -> Pose:
    direction = _random_direction(rng)
    axis = _random_direction(rng)
    distance = rng.uniform(*OUTLIER_SHIFT_M)
    angle = math.radians(rng.uniform(*OUTLIER_ROTATION_DEG))
    rotation = Rotation.from_rotvec(axis * angle)
    return Pose.from_rotation(rotation * pose.rotation, pose.t + distance * direction)


def _survey(
    spec: CorridorSpec,
    path: _Path,
    rng: np.random.Generator,
) -> Tuple[Tuple[SurveySegment, ...], SurveyNetwork, Dict[str, List[float]]]:
    """Shots as recorded (magnetic azimuths), the network they parse to, and true station offsets from S0."""
    marks = list(np.arange(0.0, path.length, spec.survey_spacing))
    if path.length - marks[-1] > 1e-9:
        marks.append(path.length)
    stations = path.position(np.array(marks))
    names = [f"S{i}" for i in range(len(stations))]

    recorded = []
    for i in range(len(stations) - 1):
        a, b = stations[i], stations[i + 1]
        delta = b - a
        length = float(np.linalg.norm(delta))
        azimuth = math.degrees(math.atan2(delta[0], delta[1]))
        magnetic = []
        for _ in range(2):
            value = azimuth
            if spec.survey_azimuth_noise_deg > 0:
                value += rng.normal(0.0, spec.survey_azimuth_noise_deg)
            magnetic.append(apply_declination(value, -spec.declination))
        if spec.survey_length_noise > 0:
            length = max(length + rng.normal(0.0, spec.survey_length_noise), abs(float(delta[2])) + 1e-6)
        recorded.append(SurveySegment(names[i], names[i + 1], length, *magnetic, float(a[2]), float(b[2])))

    closures = ((names[0], names[-1]),) if spec.closed and len(names) > 2 else ()
    parsed = tuple(
        replace(
            s,
            azimuth_in=apply_declination(s.azimuth_in, spec.declination),
            azimuth_out=apply_declination(s.azimuth_out, spec.declination),
        )
        for s in recorded
    )
    truth = {name: [float(v) for v in point - stations[0]] for name, point in zip(names, stations)}
    return tuple(recorded), SurveyNetwork(parsed, closures, spec.declination), truth


def generate(spec: CorridorSpec) -> SynthBundle:
    """
    Fabricate a corridor, the rig's SLAM outputs and every auxiliary record.

    Trajectories and clouds are in per-camera SLAM frames: world yaw and xy
    misalignment, SLAM clock = dive clock - time_shift, and
    z = z_sign * (depth - depth_offset).
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    waypoints = np.array(spec.waypoints, dtype=float)
    path = _Path(waypoints)
    duration = path.length / spec.speed

    walls_world = _walls(spec, path, rng)

    times = np.arange(int(math.floor(duration * spec.keyframe_rate + 1e-9)) + 1) / spec.keyframe_rate
    arc = np.minimum(times * spec.speed, path.length)
    world = _camera_world_poses(spec, path, arc)
    misalignments = {
        camera: _yaw_pose(spec.misalign_yaw_deg[i], spec.misalign_xy[i])
        for i, camera in enumerate(spec.camera_ids)
    }

    trajectories: Dict[str, Trajectory] = {}
    for camera in spec.camera_ids:
        samples = []
        for t, pose in zip(times, world[camera]):
            slam = compose(misalignments[camera], pose)
            slam = Pose(_to_slam(pose.t[None, :], misalignments[camera], spec)[0], slam.q)
            slam = _perturb(slam, rng, spec.position_noise, spec.rotation_noise_deg)
            samples.append((float(t) - spec.time_shift, slam))
        trajectories[camera] = Trajectory(f"{camera}:slam", tuple(samples), camera_id=camera)

    clouds: Dict[str, PointCloud] = {}
    for index, camera in enumerate(spec.camera_ids):
        share = walls_world[index::len(spec.camera_ids)]
        clouds[camera] = PointCloud(_to_slam(share, misalignments[camera], spec))

    target = pose_from_euler(
        spec.target_position,
        EulerAngles(*(math.radians(v) for v in spec.target_rpy_deg)),
    )
    observations: Dict[str, List[TargetObservation]] = {}
    outliers: Dict[str, List[int]] = {}
    n_outliers = int(math.floor(spec.outlier_fraction * spec.observation_count + 0.5))
    for camera in spec.camera_ids:
        distances = np.array([np.linalg.norm(p.t - target.t) for p in world[camera]])
        chosen = sorted(np.argsort(distances, kind="stable")[: spec.observation_count].tolist())
        bad = sorted(rng.choice(len(chosen), size=min(n_outliers, len(chosen)), replace=False).tolist())
        rows = []
        for j, k in enumerate(chosen):
            seen = _outlier(target, rng) if j in bad else _perturb(
                target, rng, spec.target_position_noise, spec.target_rotation_noise_deg
            )
            rows.append(TargetObservation(float(times[k]) - spec.time_shift, camera, compose(invert(world[camera][k]), seen)))
        observations[camera] = rows
        outliers[camera] = bad

    log_times = np.arange(
        -spec.log_margin,
        duration + spec.log_margin + 1e-9,
        1.0 / spec.depth_log_rate,
    )
    log_depth = path.position(np.clip(log_times * spec.speed, 0.0, path.length))[:, 2]
    if spec.depth_noise > 0:
        log_depth = log_depth + rng.normal(0.0, spec.depth_noise, log_depth.size)
    depth_log = DepthLog(log_times, np.maximum(log_depth, 0.0))

    survey_shots, survey, stations = _survey(spec, path, rng)

    reference = spec.center_camera
    ground_truth = {
        "seed": spec.seed,
        "spec": spec.as_dict(),
        "duration_s": duration,
        "path_length_m": path.length,
        "keyframes": int(times.size),
        "reference_camera": reference,
        "target_world_pose": list(target.as_row()),
        "stations": stations,
        "cameras": {
            camera: {
                "misalignment": list(misalignments[camera].as_row()),
                "to_reference": list(compose(misalignments[reference], invert(misalignments[camera])).as_row()),
                "depth_correction": {
                    "time_shift_s": spec.time_shift,
                    "scale": float(spec.z_sign),
                    "offset_m": spec.depth_offset,
                },
                "outlier_indices": outliers[camera],
            }
            for camera in spec.camera_ids
        },
    }
    logger.info(
        "Synthetic bundle generated",
        extra={"extra_fields": {
            "seed": spec.seed,
            "keyframes": int(times.size),
            "wall_points": int(walls_world.shape[0]),
            "stations": len(stations),
            "duration_s": duration,
        }}
    )
    return SynthBundle(
        spec=spec,
        centerline=waypoints,
        walls=PointCloud(walls_world),
        trajectories=trajectories,
        clouds=clouds,
        observations=observations,
        depth_log=depth_log,
        survey=survey,
        survey_shots=survey_shots,
        ground_truth=ground_truth,
    )
