from .depth_log import DepthLog, load_depth_log, parse_depth_log, write_depth_log
from .fusion import (
    DepthCorrection,
    UniformSeries,
    apply_correction,
    estimate_depth_regression,
    estimate_time_shift,
    fuse,
    resample,
    resample_depth_log,
    resample_trajectory_z,
)

__all__ = [
    "DepthCorrection",
    "DepthLog",
    "UniformSeries",
    "apply_correction",
    "estimate_depth_regression",
    "estimate_time_shift",
    "fuse",
    "load_depth_log",
    "parse_depth_log",
    "resample",
    "resample_depth_log",
    "resample_trajectory_z",
    "write_depth_log",
]
