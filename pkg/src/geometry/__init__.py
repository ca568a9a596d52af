from .pose import (
    EulerAngles,
    Pose,
    angular_difference,
    circular_mean,
    compose,
    euler_angles,
    invert,
    mean_pose,
    pose_from_euler,
    rotation_angle_between,
    wrap_angle,
)
from .trajectory import (
    TRAJECTORY_HEADER,
    Trajectory,
    TrajectorySample,
    format_trajectory,
    load_trajectory,
    parse_trajectory,
    write_trajectory,
)

__all__ = [
    "EulerAngles",
    "Pose",
    "TRAJECTORY_HEADER",
    "Trajectory",
    "TrajectorySample",
    "angular_difference",
    "circular_mean",
    "compose",
    "euler_angles",
    "format_trajectory",
    "invert",
    "load_trajectory",
    "mean_pose",
    "parse_trajectory",
    "pose_from_euler",
    "rotation_angle_between",
    "wrap_angle",
    "write_trajectory",
]
