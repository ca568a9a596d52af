"""
Left/right/up/down wall extraction and skeleton assembly.

Frames are the depth-corrected world: x east, y north, z depth (positive
down). "Up" therefore means smaller z.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

from .centerline import CenterlineNode, SkeletonEdge, average_trajectory, build_mst
from .pointcloud import PointCloud
from ..geometry.trajectory import Trajectory
from ..utils.config import SkeletonSettings
from ..utils.errors import DegenerateHeading, InvalidParameter
from ..utils.logging import get_logger

logger = get_logger(__name__)

_HEADING_EPS = 1e-9
SIDES = ("left", "right", "up", "down")


@dataclass(frozen=True, eq=False)
class BoundaryPoint:
    point: np.ndarray
    distance: float


@dataclass(frozen=True, eq=False)
class LRUDRecord:
    node_id: int
    heading: np.ndarray
    left: Optional[BoundaryPoint] = None
    right: Optional[BoundaryPoint] = None
    up: Optional[BoundaryPoint] = None
    down: Optional[BoundaryPoint] = None
    lr_candidates: int = 0
    ud_candidates: int = 0
    heading_source: str = "mst"

    def side(self, name: str) -> Optional[BoundaryPoint]:
        return getattr(self, name)


@dataclass(frozen=True)
class CaveSkeleton:
    nodes: Tuple[CenterlineNode, ...]
    edges: Tuple[SkeletonEdge, ...]
    lrud: Tuple[LRUDRecord, ...]
    provenance: Dict[str, object] = field(default_factory=dict)


def _horizontal_unit(heading: Sequence[float]) -> np.ndarray:
    h = np.asarray(heading, dtype=float).reshape(3)[:2]
    norm = float(np.hypot(h[0], h[1]))
    if not norm > _HEADING_EPS:
        raise DegenerateHeading("heading has no horizontal component")
    return h / norm


def extract_lr(
    node: CenterlineNode,
    heading: Sequence[float],
    cloud: PointCloud,
    depth_tol: float,
) -> Tuple[Optional[BoundaryPoint], Optional[BoundaryPoint], int]:
    """
    Nearest wall point on each side of a node, at the node's depth.

    Candidates have |z - node z| <= depth_tol. The lateral coordinate is the
    projection on the right vector (h_y, -h_x) of the horizontal heading;
    negative is left, positive is right. Each side keeps its point with the
    smallest horizontal distance (first in cloud order on ties).

    Returns:
        (left, right, candidate count)

    Raises:
        DegenerateHeading: Heading is vertical
    """
    h = _horizontal_unit(heading)
    if len(cloud) == 0:
        return None, None, 0
    center = node.position
    offsets = cloud.points - center
    mask = np.abs(offsets[:, 2]) <= depth_tol
    indices = np.flatnonzero(mask)
    lateral = offsets[indices, 0] * h[1] - offsets[indices, 1] * h[0]
    horizontal = np.hypot(offsets[indices, 0], offsets[indices, 1])

    def pick(side_mask: np.ndarray) -> Optional[BoundaryPoint]:
        if not np.any(side_mask):
            return None
        local = np.flatnonzero(side_mask)
        best = local[int(np.argmin(horizontal[local]))]
        return BoundaryPoint(cloud.points[indices[best]].copy(), float(horizontal[best]))

    return pick(lateral < 0.0), pick(lateral > 0.0), int(indices.size)


def extract_ud(
    node: CenterlineNode,
    cloud: PointCloud,
    lateral_radius: float,
    tree: Optional[cKDTree] = None,
) -> Tuple[Optional[BoundaryPoint], Optional[BoundaryPoint], int]:
    """
    Ceiling and floor points over a node.

    Candidates lie within ``lateral_radius`` horizontally of the node. Up is
    the smallest-depth candidate shallower than the node, down the
    largest-depth candidate deeper than it; equal depths resolve to the
    horizontally nearest point, then to the first in cloud order. Distances
    are vertical.

    Args:
        tree: Optional k-d tree over the cloud's (x, y) to reuse across nodes

    Returns:
        (up, down, candidate count)
    """
    if not lateral_radius > 0:
        raise InvalidParameter("lateral_radius must be > 0")
    if len(cloud) == 0:
        return None, None, 0
    if tree is None:
        tree = cKDTree(cloud.points[:, :2])
    center = node.position
    indices = np.array(sorted(tree.query_ball_point(center[:2], lateral_radius)), dtype=int)
    if indices.size == 0:
        return None, None, 0
    depths = cloud.points[indices, 2]
    horizontal = np.hypot(*(cloud.points[indices, :2] - center[:2]).T)

    def pick(side_mask: np.ndarray, shallowest: bool) -> Optional[BoundaryPoint]:
        if not np.any(side_mask):
            return None
        local = np.flatnonzero(side_mask)
        key = depths[local] if shallowest else -depths[local]
        best = local[np.lexsort((horizontal[local], key))[0]]
        point = cloud.points[indices[best]].copy()
        return BoundaryPoint(point, float(abs(point[2] - center[2])))

    return pick(depths < center[2], True), pick(depths > center[2], False), int(indices.size)


def _traversal_headings(nodes: Sequence[CenterlineNode], edges: Sequence[SkeletonEdge]) -> Dict[int, np.ndarray]:
    """Heading per node from a depth-first walk of the MST starting at node 0."""
    if not nodes:
        return {}
    graph = nx.Graph()
    graph.add_nodes_from(node.id for node in nodes)
    # sorted insertion keeps each adjacency list, and so the walk, in ascending id order
    graph.add_edges_from(sorted((min(e.a, e.b), max(e.a, e.b)) for e in edges))
    position = {node.id: node.position for node in nodes}

    root = nodes[0].id
    children = nx.dfs_successors(graph, source=root)
    parents = nx.dfs_predecessors(graph, source=root)
    headings: Dict[int, np.ndarray] = {}
    for node_id in nx.dfs_preorder_nodes(graph, source=root):
        if children.get(node_id):
            headings[node_id] = position[children[node_id][0]] - position[node_id]
        elif node_id in parents:
            headings[node_id] = position[node_id] - position[parents[node_id]]
    return headings


def _pose_forward(node: CenterlineNode) -> np.ndarray:
    return node.pose.rotation.apply([1.0, 0.0, 0.0])


def build_skeleton(
    trajs: Sequence[Trajectory],
    cloud: PointCloud,
    params: SkeletonSettings = SkeletonSettings(),
) -> CaveSkeleton:
    """
    Average trajectories, span them with an MST and measure the passage at every node.

    Node headings follow the MST depth-first traversal from node 0 (children
    in ascending id); leaves use their incoming direction and a node with no
    usable MST direction falls back to its pose's forward axis.

    Raises:
        EmptyTrajectory, InvalidParameter, DegenerateHeading: From the component steps
    """
    nodes = average_trajectory(trajs, params.center_index, params.flag_radius)
    edges = build_mst(nodes)
    headings = _traversal_headings(nodes, edges)
    tree = cKDTree(cloud.points[:, :2]) if len(cloud) else None

    records = []
    for node in nodes:
        heading = headings.get(node.id)
        source = "mst"
        if heading is None or math.hypot(heading[0], heading[1]) <= _HEADING_EPS:
            heading, source = _pose_forward(node), "pose"
        left, right, lr_count = extract_lr(node, heading, cloud, params.depth_tol)
        up, down, ud_count = extract_ud(node, cloud, params.lateral_radius, tree)
        records.append(LRUDRecord(
            node_id=node.id,
            heading=_horizontal_unit(heading),
            left=left,
            right=right,
            up=up,
            down=down,
            lr_candidates=lr_count,
            ud_candidates=ud_count,
            heading_source=source,
        ))

    provenance = {
        "trajectories": [t.frame_id for t in trajs],
        "keyframes": [len(t) for t in trajs],
        "cloud_points": len(cloud),
        "center_index": params.center_index,
        "flag_radius_m": params.flag_radius,
        "depth_tol_m": params.depth_tol,
        "lateral_radius_m": params.lateral_radius,
    }
    logger.info(
        "Skeleton built",
        extra={"extra_fields": {"nodes": len(nodes), "edges": len(edges), "cloud_points": len(cloud)}}
    )
    return CaveSkeleton(tuple(nodes), tuple(edges), tuple(records), provenance)


def _summary(values: List[float]) -> Dict[str, Optional[float]]:
    if not values:
        return {"count": 0, "mean": None, "min": None, "max": None}
    return {
        "count": len(values),
        "mean": float(np.mean(values)),
        "min": float(np.min(values)),
        "max": float(np.max(values)),
    }


def passage_profile(skel: CaveSkeleton) -> Dict[str, object]:
    """Per-node width (left + right) and height (up + down) with summaries."""
    rows = []
    widths: List[float] = []
    heights: List[float] = []
    for record in skel.lrud:
        width = record.left.distance + record.right.distance if record.left and record.right else None
        height = record.up.distance + record.down.distance if record.up and record.down else None
        if width is not None:
            widths.append(width)
        if height is not None:
            heights.append(height)
        rows.append({"id": record.node_id, "width_m": width, "height_m": height})
    return {"nodes": rows, "width_m": _summary(widths), "height_m": _summary(heights)}
