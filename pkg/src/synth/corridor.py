"""
Synthetic corridor description.

World frame: x east, y north, z depth (positive down). The rig follows the
waypoint polyline at constant speed; the corridor has a rectangular cross
section centred on that polyline.
"""

import math
import tomllib
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from ..utils.errors import SpecError
from ..utils.tabular import read_text

Vector3 = Tuple[float, float, float]

CAMERA_IDS = ("left", "center", "right")


@dataclass(frozen=True)
class CorridorSpec:
    # bends fall on whole multiples of speed / depth_log_rate along the path
    waypoints: Tuple[Vector3, ...] = ((0.0, 0.0, 15.0), (24.0, 12.0, 18.0), (42.0, 3.0, 12.0), (69.0, 21.0, 18.0))
    width: float = 4.0
    height: float = 2.0
    wall_density: float = 20.0
    wall_noise: float = 0.0

    camera_ids: Tuple[str, ...] = CAMERA_IDS
    camera_yaw_offsets_deg: Tuple[float, ...] = (30.0, 0.0, -30.0)
    camera_lateral_offsets: Tuple[float, ...] = (-0.25, 0.0, 0.25)
    center_index: Optional[int] = None
    center_pitch_deg: float = 30.0
    keyframe_rate: float = 4.0
    depth_log_rate: float = 0.1
    speed: float = 0.3
    log_margin: float = 60.0

    position_noise: float = 0.0
    rotation_noise_deg: float = 0.0
    depth_noise: float = 0.0

    time_shift: float = 0.0
    depth_offset: float = 0.0
    z_sign: int = 1
    misalign_yaw_deg: Tuple[float, ...] = (0.0, 0.0, 0.0)
    misalign_xy: Tuple[Tuple[float, float], ...] = ((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))

    target_position: Vector3 = (3.0, 0.5, 15.9)
    target_rpy_deg: Vector3 = (0.0, 0.0, 90.0)
    observation_count: int = 10
    outlier_fraction: float = 0.0
    target_position_noise: float = 0.0
    target_rotation_noise_deg: float = 0.0

    survey_spacing: float = 5.0
    survey_azimuth_noise_deg: float = 0.0
    survey_length_noise: float = 0.0
    declination: float = 0.0
    seed: int = 0

    def __post_init__(self):
        _validate(self)

    @property
    def closed(self) -> bool:
        first, last = self.waypoints[0], self.waypoints[-1]
        return math.dist(first, last) <= 1e-9

    @property
    def center_camera(self) -> str:
        """The pitched camera; the middle of camera_ids unless center_index names one."""
        index = len(self.camera_ids) // 2 if self.center_index is None else self.center_index
        return self.camera_ids[index]

    def as_dict(self) -> Dict[str, Any]:
        return _plain(asdict(self))


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise SpecError(message)


def _validate(spec: CorridorSpec) -> None:
    _check(len(spec.waypoints) >= 2, "waypoints: need at least 2")
    for point in spec.waypoints:
        _check(len(point) == 3 and all(math.isfinite(v) for v in point), "waypoints: each must be 3 finite numbers")
        _check(point[2] >= 0.0, "waypoints: depth (z) must be >= 0")
    for a, b in zip(spec.waypoints, spec.waypoints[1:]):
        _check(math.hypot(b[0] - a[0], b[1] - a[1]) > 1e-9, "waypoints: consecutive points must differ horizontally")

    for name in ("width", "height", "wall_density", "keyframe_rate", "depth_log_rate", "speed", "survey_spacing"):
        value = getattr(spec, name)
        _check(math.isfinite(value) and value > 0, f"{name}: must be > 0")
    for name in (
        "wall_noise", "position_noise", "rotation_noise_deg", "depth_noise", "log_margin",
        "target_position_noise", "target_rotation_noise_deg", "survey_azimuth_noise_deg", "survey_length_noise",
    ):
        value = getattr(spec, name)
        _check(math.isfinite(value) and value >= 0, f"{name}: must be >= 0")
    for name in ("time_shift", "depth_offset", "center_pitch_deg", "declination"):
        _check(math.isfinite(getattr(spec, name)), f"{name}: must be finite")

    _check(spec.z_sign in (1, -1), "z_sign: must be 1 or -1")
    _check(0.0 <= spec.outlier_fraction < 1.0, "outlier_fraction: must be in [0, 1)")
    _check(spec.observation_count >= 0, "observation_count: must be >= 0")

    cameras = len(spec.camera_ids)
    _check(cameras >= 1, "camera_ids: need at least one camera")
    _check(len(set(spec.camera_ids)) == cameras, "camera_ids: must be unique")
    if spec.center_index is not None:
        _check(0 <= spec.center_index < cameras, "center_index: must index camera_ids")
    for name in ("camera_yaw_offsets_deg", "camera_lateral_offsets", "misalign_yaw_deg", "misalign_xy"):
        _check(len(getattr(spec, name)) == cameras, f"{name}: need one entry per camera")
    _check(all(len(xy) == 2 for xy in spec.misalign_xy), "misalign_xy: each entry must be (x, y)")
    _check(len(spec.target_position) == 3 and len(spec.target_rpy_deg) == 3, "target pose: need 3 values each")


def _as_tuple(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_as_tuple(v) for v in value)
    return value


def parse_corridor_spec(text: str, source: str = "<spec>", seed: Optional[int] = None) -> CorridorSpec:
    """
    Build a CorridorSpec from a flat TOML document whose keys mirror the fields.

    Raises:
        SpecError: Syntax errors, unknown keys or invalid values
    """
    try:
        document = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise SpecError(f"{source}: invalid TOML: {e}") from e
    known = {f.name for f in fields(CorridorSpec)}
    unknown = sorted(set(document) - known)
    if unknown:
        raise SpecError(f"{source}: unknown keys: {', '.join(unknown)}")
    values = {key: _as_tuple(value) for key, value in document.items()}
    if seed is not None:
        values["seed"] = seed
    try:
        return CorridorSpec(**values)
    except TypeError as e:
        raise SpecError(f"{source}: {e}") from e


def load_corridor_spec(path: Optional[Path], seed: Optional[int] = None) -> CorridorSpec:
    if path is None:
        return CorridorSpec() if seed is None else CorridorSpec(seed=seed)
    return parse_corridor_spec(read_text(path), source=str(path), seed=seed)
