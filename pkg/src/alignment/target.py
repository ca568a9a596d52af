"""
Co-register trajectories through a shared fiducial target.

Each dataset observes the target as camera->target relative poses. Composing
them with the keyframe poses gives target poses in the dataset's world frame;
outlier rejection and averaging give one estimate per frame, and two such
estimates give the transform between frames.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..geometry.pose import (
    Pose,
    angular_difference,
    circular_mean,
    compose,
    euler_angles,
    invert,
    mean_pose,
)
from ..geometry.trajectory import TRAJECTORY_HEADER, Trajectory
from ..utils.errors import FrameMismatch, ParseError, TooFewObservations, UnmatchedObservation, UnmatchedTimestamp
from ..utils.logging import get_logger
from ..utils.tabular import format_float, parse_float, read_table, read_text, render_csv, write_text

logger = get_logger(__name__)

ASSOCIATION_TOLERANCE_S = 0.02
# deviations below these are rounding noise
DISTANCE_FLOOR_M = 1e-9
ANGLE_FLOOR_RAD = 1e-9
OBSERVATION_HEADER = TRAJECTORY_HEADER


@dataclass(frozen=True)
class TargetObservation:
    timestamp: float
    camera_id: str
    rel_pose: Pose


@dataclass(frozen=True)
class TargetEstimate:
    """Target pose in one world frame plus the filter's diagnostics.

    ``angle_sigmas`` are (roll, pitch, yaw) deviations over stage-1
    survivors. ``survivor_distance_sigma`` is the distance spread of the
    stage-1 survivors about their own recomputed mean, for auditing the
    alternative reading in which the mean is refreshed between stages.
    """

    world_pose: Pose
    inlier_count: int
    total_count: int
    distance_sigma: float
    angle_sigmas: Tuple[float, float, float]
    frame_id: str = ""
    stage1_count: int = 0
    survivor_distance_sigma: float = 0.0
    all_rejected: bool = False
    inlier_indices: Tuple[int, ...] = field(default_factory=tuple)

    def as_report(self) -> Dict[str, object]:
        return {
            "frame_id": self.frame_id,
            "world_pose": list(self.world_pose.as_row()),
            "inlier_count": self.inlier_count,
            "stage1_count": self.stage1_count,
            "total_count": self.total_count,
            "distance_sigma_m": self.distance_sigma,
            "survivor_distance_sigma_m": self.survivor_distance_sigma,
            "angle_sigmas_rad": {
                "roll": self.angle_sigmas[0],
                "pitch": self.angle_sigmas[1],
                "yaw": self.angle_sigmas[2],
            },
            "all_rejected": self.all_rejected,
            "inlier_indices": list(self.inlier_indices),
        }


@dataclass(frozen=True)
class FrameTransform:
    """Maps coordinates in ``from_frame`` into ``to_frame``."""

    from_frame: str
    to_frame: str
    transform: Pose

    def inverse(self) -> "FrameTransform":
        return FrameTransform(self.to_frame, self.from_frame, invert(self.transform))

    def as_report(self) -> Dict[str, object]:
        return {
            "from_frame": self.from_frame,
            "to_frame": self.to_frame,
            "transform": list(self.transform.as_row()),
        }


def target_world_poses(
    traj: Trajectory,
    observations: Sequence[TargetObservation],
    tolerance: float = ASSOCIATION_TOLERANCE_S,
) -> List[Pose]:
    """
    World pose of the target for every observation, in input order.

    Raises:
        UnmatchedObservation: An observation has no keyframe within tolerance
    """
    poses = []
    for obs in observations:
        try:
            index = traj.index_near(obs.timestamp, tolerance)
        except UnmatchedTimestamp as e:
            raise UnmatchedObservation(f"observation at t={obs.timestamp} ({obs.camera_id}): {e}") from None
        poses.append(compose(traj.samples[index].pose, obs.rel_pose))
    return poses


def _angle_stage(survivors: List[Pose]) -> Tuple[np.ndarray, Tuple[float, float, float]]:
    angles = [euler_angles(p) for p in survivors]
    roll = np.array([a.roll for a in angles])
    pitch = np.array([a.pitch for a in angles])
    yaw = np.array([a.yaw for a in angles])

    roll_dev = roll - roll.mean()
    pitch_dev = pitch - pitch.mean()
    yaw_mean = circular_mean(yaw)
    yaw_dev = np.array([angular_difference(y, yaw_mean) for y in yaw])

    sigmas = tuple(float(np.sqrt(np.mean(d ** 2))) for d in (roll_dev, pitch_dev, yaw_dev))
    keep = np.ones(len(survivors), dtype=bool)
    for dev, sigma in zip((roll_dev, pitch_dev, yaw_dev), sigmas):
        keep &= np.abs(dev) <= max(sigma, ANGLE_FLOOR_RAD)
    return keep, sigmas


def filter_and_average(world_poses: Sequence[Pose], frame_id: str = "") -> TargetEstimate:
    """
    Outlier-rejected average of target world poses.

    Stage 1 drops poses whose distance to the mean pose exceeds the mean
    distance by more than sigma_D. Stage 2 drops, among the survivors, poses
    with any of roll/pitch/yaw further than one sigma from that angle's mean
    (circular for yaw). Rejection is strictly-greater in both stages, and a
    spread below 1e-9 (m or rad) counts as 1e-9 so rounding noise never
    rejects a pose. A single pass is made.

    If stage 2 rejects everything, the stage-1 mean is returned with
    ``all_rejected`` set.

    Raises:
        TooFewObservations: Fewer than three poses
    """
    world_poses = list(world_poses)
    total = len(world_poses)
    if total < 3:
        raise TooFewObservations(f"need at least 3 target observations, got {total}")

    center = mean_pose(world_poses)
    distances = np.array([np.linalg.norm(p.t - center.t) for p in world_poses])
    distance_sigma = float(np.std(distances))
    stage1 = [i for i, d in enumerate(distances) if d - distances.mean() <= max(distance_sigma, DISTANCE_FLOOR_M)]
    survivors = [world_poses[i] for i in stage1]

    survivor_center = mean_pose(survivors)
    survivor_distance_sigma = float(np.std([np.linalg.norm(p.t - survivor_center.t) for p in survivors]))

    keep, angle_sigmas = _angle_stage(survivors)
    inliers = [i for i, k in zip(stage1, keep) if k]
    all_rejected = not inliers
    if all_rejected:
        logger.warning(
            "Angle filter rejected every target pose; using stage-1 mean",
            extra={"extra_fields": {"frame_id": frame_id, "stage1_count": len(stage1)}}
        )
        inliers = stage1

    estimate = TargetEstimate(
        world_pose=mean_pose(world_poses[i] for i in inliers),
        inlier_count=len(inliers),
        total_count=total,
        distance_sigma=distance_sigma,
        angle_sigmas=angle_sigmas,
        frame_id=frame_id,
        stage1_count=len(stage1),
        survivor_distance_sigma=survivor_distance_sigma,
        all_rejected=all_rejected,
        inlier_indices=tuple(inliers),
    )
    logger.info(
        f"Target estimated in {frame_id or 'frame'}",
        extra={"extra_fields": {
            "frame_id": frame_id,
            "inliers": estimate.inlier_count,
            "stage1": estimate.stage1_count,
            "total": total,
            "distance_sigma_m": distance_sigma,
        }}
    )
    return estimate


def estimate_target(
    traj: Trajectory,
    observations: Sequence[TargetObservation],
    tolerance: float = ASSOCIATION_TOLERANCE_S,
) -> TargetEstimate:
    return filter_and_average(target_world_poses(traj, observations, tolerance), frame_id=traj.frame_id)


def estimate_frame_transform(est_a: TargetEstimate, est_b: TargetEstimate) -> FrameTransform:
    """Transform bringing frame-B coordinates into frame A: P_a * inv(P_b)."""
    return FrameTransform(
        from_frame=est_b.frame_id,
        to_frame=est_a.frame_id,
        transform=compose(est_a.world_pose, invert(est_b.world_pose)),
    )


def apply_frame_transform(traj: Trajectory, ft: FrameTransform) -> Trajectory:
    """
    Re-express a trajectory in ``ft.to_frame``.

    Raises:
        FrameMismatch: The trajectory is not in ``ft.from_frame``
    """
    if traj.frame_id != ft.from_frame:
        raise FrameMismatch(f"trajectory is in '{traj.frame_id}', transform expects '{ft.from_frame}'")
    return traj.map_poses(lambda p: compose(ft.transform, p), frame_id=ft.to_frame)


def shift_observations(observations: Sequence[TargetObservation], seconds: float) -> List[TargetObservation]:
    """Move observation timestamps by the same shift applied to their trajectory."""
    return [TargetObservation(o.timestamp + seconds, o.camera_id, o.rel_pose) for o in observations]


def parse_observations(text: str, camera_id: str, source: str = "<observations>") -> List[TargetObservation]:
    rows, meta = read_table(text, OBSERVATION_HEADER, source)
    camera_id = meta.get("camera_id", camera_id)
    observations = []
    for line, row in rows:
        values = [parse_float(row[c], c, line, source) for c in OBSERVATION_HEADER]
        try:
            rel_pose = Pose.from_row(values[1:])
        except ValueError as e:
            raise ParseError(str(e), source, line) from None
        observations.append(TargetObservation(values[0], camera_id, rel_pose))
    return observations


def load_observations(path: Path, camera_id: Optional[str] = None) -> List[TargetObservation]:
    path = Path(path)
    return parse_observations(read_text(path), camera_id or path.stem, source=str(path))


def format_observations(observations: Sequence[TargetObservation]) -> str:
    rows = (
        [format_float(o.timestamp), *(format_float(v) for v in o.rel_pose.as_row())]
        for o in observations
    )
    comments = [f"camera_id={observations[0].camera_id}"] if observations else []
    return render_csv(OBSERVATION_HEADER, rows, comments)


def write_observations(observations: Sequence[TargetObservation], path: Path) -> str:
    return write_text(path, format_observations(observations))
