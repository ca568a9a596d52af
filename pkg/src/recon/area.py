"""
Keyframe selection around a central pose and pose-prior manifests for an
external dense-reconstruction tool.
"""

import string
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from ..geometry.pose import Pose
from ..geometry.trajectory import Trajectory
from ..utils.errors import InvalidParameter, ParseError, PatternError
from ..utils.logging import get_logger
from ..utils.tabular import format_float, parse_float, read_table, read_text, render_csv, write_text

logger = get_logger(__name__)

MANIFEST_HEADER = ("image_id", "camera_id", "timestamp_s", "tx", "ty", "tz", "qx", "qy", "qz", "qw")
DEFAULT_IMAGE_PATTERN = "{camera_id}/{timestamp:.6f}.png"


@dataclass(frozen=True)
class AreaMember:
    camera_id: str
    timestamp: float
    pose: Pose


@dataclass(frozen=True)
class AreaSelection:
    center: Pose
    radius: float
    members: Tuple[AreaMember, ...]

    @property
    def empty(self) -> bool:
        return not self.members


def select_keyframes(trajs: Sequence[Trajectory], center: Pose, radius: float) -> AreaSelection:
    """
    Every keyframe of every trajectory within ``radius`` of the center position.

    Distance ignores orientation. Members are sorted by (camera_id, timestamp).
    An empty result is returned with a warning, not raised.

    Raises:
        InvalidParameter: radius <= 0
    """
    if not radius > 0:
        raise InvalidParameter("radius must be > 0")
    members = []
    for traj in trajs:
        if len(traj) == 0:
            continue
        distances = np.linalg.norm(traj.positions - center.t, axis=1)
        for sample, distance in zip(traj.samples, distances):
            if distance <= radius:
                members.append(AreaMember(traj.camera_id, sample.timestamp, sample.pose))
    members.sort(key=lambda m: (m.camera_id, m.timestamp))

    selection = AreaSelection(center, float(radius), tuple(members))
    if selection.empty:
        logger.warning(
            "Empty area selection",
            extra={"extra_fields": {"center": list(center.t), "radius_m": radius}}
        )
    else:
        logger.info(
            "Area keyframes selected",
            extra={"extra_fields": {
                "members": len(members),
                "cameras": sorted({m.camera_id for m in members}),
                "radius_m": radius,
            }}
        )
    return selection


def check_pattern(pattern: str) -> None:
    """
    Raises:
        PatternError: Pattern is malformed or lacks {camera_id} / {timestamp} fields
    """
    try:
        names = {name for _, name, _, _ in string.Formatter().parse(pattern) if name is not None}
    except ValueError as e:
        raise PatternError(f"bad image name pattern {pattern!r}: {e}") from None
    missing = sorted({"camera_id", "timestamp"} - names)
    if missing:
        raise PatternError(f"image name pattern {pattern!r} lacks fields: {', '.join(missing)}")
    unknown = sorted(names - {"camera_id", "timestamp"})
    if unknown:
        raise PatternError(f"image name pattern {pattern!r} has unknown fields: {', '.join(unknown)}")


def image_name(pattern: str, member: AreaMember) -> str:
    try:
        return pattern.format(camera_id=member.camera_id, timestamp=member.timestamp)
    except (ValueError, IndexError) as e:
        raise PatternError(f"bad image name pattern {pattern!r}: {e}") from None


def export_manifest(sel: AreaSelection, pattern: str = DEFAULT_IMAGE_PATTERN) -> str:
    """
    Render the selection as a pose-prior CSV, one row per member in selection order.

    Raises:
        PatternError: See check_pattern
    """
    check_pattern(pattern)
    rows = (
        [
            image_name(pattern, m),
            m.camera_id,
            format_float(m.timestamp),
            *(format_float(v) for v in m.pose.as_row()),
        ]
        for m in sel.members
    )
    return render_csv(MANIFEST_HEADER, rows)


def write_manifest(sel: AreaSelection, path: Path, pattern: str = DEFAULT_IMAGE_PATTERN) -> str:
    return write_text(path, export_manifest(sel, pattern))


def parse_manifest(text: str, source: str = "<manifest>") -> List[AreaMember]:
    """Read an exported manifest back into members, preserving row order."""
    rows, _ = read_table(text, MANIFEST_HEADER, source)
    members = []
    for line, row in rows:
        values = [parse_float(row[c], c, line, source) for c in MANIFEST_HEADER[2:]]
        try:
            pose = Pose.from_row(values[1:])
        except ValueError as e:
            raise ParseError(str(e), source, line) from None
        members.append(AreaMember(row["camera_id"], values[0], pose))
    return members


def load_manifest(path: Path) -> List[AreaMember]:
    return parse_manifest(read_text(path), source=str(path))


def area_report(sel: AreaSelection, name: str = "") -> dict:
    return {
        "name": name,
        "center": list(sel.center.as_row()),
        "radius_m": sel.radius,
        "members": len(sel.members),
        "empty": sel.empty,
        "per_camera": {
            camera: sum(1 for m in sel.members if m.camera_id == camera)
            for camera in sorted({m.camera_id for m in sel.members})
        },
    }
