"""
Sparse point clouds and their ASCII PLY form.

Only ``format ascii 1.0`` with a single ``vertex`` element is read: float
``x``, ``y``, ``z`` plus optional ``uchar`` ``red``/``green``/``blue``
(``r``/``g``/``b`` accepted). Other vertex properties are skipped.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

from ..depth.fusion import DepthCorrection
from ..utils.errors import DataError, ParseError
from ..utils.logging import get_logger
from ..utils.tabular import format_float, read_text, write_text

logger = get_logger(__name__)

_COLOR_NAMES = (("red", "green", "blue"), ("r", "g", "b"))


@dataclass(frozen=True, eq=False)
class PointCloud:
    """(N, 3) points in meters, z positive down once depth-corrected; optional (N, 3) uint8 colors."""

    points: np.ndarray
    colors: Optional[np.ndarray] = None

    def __post_init__(self):
        points = np.array(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise DataError("point cloud coordinates must be finite")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        if self.colors is not None:
            colors = np.array(self.colors, dtype=np.uint8).reshape(-1, 3)
            if colors.shape[0] != points.shape[0]:
                raise DataError("point cloud colors and points differ in length")
            colors.setflags(write=False)
            object.__setattr__(self, "colors", colors)

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(np.zeros((0, 3)))

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def with_points(self, points: np.ndarray) -> "PointCloud":
        return PointCloud(points, self.colors)


def correct_cloud_depth(cloud: PointCloud, corr: DepthCorrection) -> PointCloud:
    """Apply the depth correction of the trajectory that produced the cloud: z := a*z + b."""
    points = cloud.points.copy()
    points[:, 2] = corr.scale * points[:, 2] + corr.offset
    return cloud.with_points(points)


def transform_cloud(cloud: PointCloud, transform) -> PointCloud:
    """
    Re-express a cloud through a rigid transform.

    Args:
        cloud: Input cloud
        transform: A Pose, or a FrameTransform (its ``transform`` pose is used)
    """
    pose = getattr(transform, "transform", transform)
    return cloud.with_points(pose.transform_points(cloud.points))


def merge_clouds(clouds: Iterable[PointCloud]) -> PointCloud:
    """Concatenate clouds in input order. Colors survive only if every cloud has them."""
    clouds = list(clouds)
    if not clouds:
        return PointCloud.empty()
    points = np.concatenate([c.points for c in clouds], axis=0)
    colors = None
    if all(c.colors is not None for c in clouds):
        colors = np.concatenate([c.colors for c in clouds], axis=0)
    return PointCloud(points, colors)


def _parse_header(lines: List[str], source: str):
    if not lines or lines[0].strip() != "ply":
        raise ParseError("not a PLY file (missing 'ply' magic)", source, 1)

    vertex_count = None
    properties: List[str] = []
    in_vertex = False
    for index, raw in enumerate(lines[1:], start=2):
        words = raw.split()
        if not words or words[0] in ("comment", "obj_info"):
            continue
        keyword = words[0]
        if keyword == "format":
            if len(words) < 2 or words[1] != "ascii":
                raise ParseError(f"unsupported PLY format '{' '.join(words[1:])}'; only ascii is read", source, index)
        elif keyword == "element":
            if len(words) != 3:
                raise ParseError("malformed element line", source, index)
            in_vertex = words[1] == "vertex"
            if in_vertex:
                try:
                    vertex_count = int(words[2])
                except ValueError:
                    raise ParseError(f"bad vertex count {words[2]!r}", source, index) from None
                if vertex_count < 0:
                    raise ParseError("negative vertex count", source, index)
            elif vertex_count is None:
                raise ParseError("elements before 'vertex' are not supported", source, index)
        elif keyword == "property":
            if in_vertex:
                if len(words) != 3:
                    raise ParseError("list properties on vertices are not supported", source, index)
                properties.append(words[2])
        elif keyword == "end_header":
            if vertex_count is None:
                raise ParseError("no vertex element", source, index)
            return vertex_count, properties, index
        else:
            raise ParseError(f"unknown header keyword '{keyword}'", source, index)
    raise ParseError("header not terminated by end_header", source, len(lines))


def parse_ply(text: str, source: str = "<ply>") -> PointCloud:
    """
    Parse an ASCII PLY document.

    Raises:
        ParseError: Bad header, missing x/y/z, malformed or truncated vertex rows
    """
    lines = text.splitlines()
    count, properties, header_end = _parse_header(lines, source)
    for axis in ("x", "y", "z"):
        if axis not in properties:
            raise ParseError(f"vertex property '{axis}' missing", source, header_end)
    xyz = [properties.index(a) for a in ("x", "y", "z")]
    rgb = next(
        ([properties.index(n) for n in names] for names in _COLOR_NAMES if all(n in properties for n in names)),
        None,
    )

    body = lines[header_end:header_end + count]
    if len(body) < count:
        raise ParseError(
            f"truncated: expected {count} vertices, found {len(body)}",
            source,
            header_end + len(body) + 1,
        )

    points = np.empty((count, 3))
    colors = np.empty((count, 3), dtype=np.uint8) if rgb else None
    for offset, raw in enumerate(body):
        line = header_end + offset + 1
        words = raw.split()
        if len(words) != len(properties):
            raise ParseError(f"expected {len(properties)} values, found {len(words)}", source, line)
        try:
            values = [float(words[i]) for i in xyz]
        except ValueError:
            raise ParseError("vertex coordinate is not a number", source, line) from None
        if not all(np.isfinite(values)):
            raise ParseError("vertex coordinate must be finite", source, line)
        points[offset] = values
        if rgb:
            try:
                channel = [int(words[i]) for i in rgb]
            except ValueError:
                raise ParseError("color channel is not an integer", source, line) from None
            if not all(0 <= c <= 255 for c in channel):
                raise ParseError("color channel outside 0..255", source, line)
            colors[offset] = channel
    return PointCloud(points, colors)


def load_ply(path: Path) -> PointCloud:
    cloud = parse_ply(read_text(path), source=str(path))
    logger.debug(f"Loaded {len(cloud)} points from {path}")
    return cloud


def format_ply(cloud: PointCloud) -> str:
    header = ["ply", "format ascii 1.0", f"element vertex {len(cloud)}"]
    header += [f"property double {axis}" for axis in ("x", "y", "z")]
    if cloud.colors is not None:
        header += [f"property uchar {name}" for name in _COLOR_NAMES[0]]
    header.append("end_header")

    rows = []
    for index, point in enumerate(cloud.points):
        fields = [format_float(v) for v in point]
        if cloud.colors is not None:
            fields += [str(int(c)) for c in cloud.colors[index]]
        rows.append(" ".join(fields))
    return "\n".join(header + rows) + "\n"


def write_ply(cloud: PointCloud, path: Path) -> str:
    return write_text(path, format_ply(cloud))
