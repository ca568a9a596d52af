from .target import (
    FrameTransform,
    TargetEstimate,
    TargetObservation,
    apply_frame_transform,
    estimate_frame_transform,
    estimate_target,
    filter_and_average,
    load_observations,
    parse_observations,
    shift_observations,
    target_world_poses,
    write_observations,
)

__all__ = [
    "FrameTransform",
    "TargetEstimate",
    "TargetObservation",
    "apply_frame_transform",
    "estimate_frame_transform",
    "estimate_target",
    "filter_and_average",
    "load_observations",
    "parse_observations",
    "shift_observations",
    "target_world_poses",
    "write_observations",
]
