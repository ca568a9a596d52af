"""
Centerline extraction: flag-and-average the camera trajectories into nodes,
then connect the nodes with a Euclidean minimum spanning tree.
"""

from dataclasses import dataclass
from itertools import combinations
from typing import List, NamedTuple, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.spatial import Delaunay, QhullError, cKDTree

from ..geometry.pose import Pose, mean_pose
from ..geometry.trajectory import Trajectory
from ..utils.errors import EmptyTrajectory, InvalidParameter
from ..utils.logging import get_logger

logger = get_logger(__name__)

FLAG_RADIUS_M = 1.0
# singular values below this fraction of the largest collapse a hull dimension
HULL_TOLERANCE = 1e-9


@dataclass(frozen=True)
class CenterlineNode:
    """Average of one flag set.

    ``members`` lists the absorbed poses as (trajectory index, sample index);
    the first member is the center-trajectory pose that seeded the node.
    """

    id: int
    pose: Pose
    source_count: int
    members: Tuple[Tuple[int, int], ...] = ()

    @property
    def position(self) -> np.ndarray:
        return self.pose.t


class SkeletonEdge(NamedTuple):
    a: int
    b: int
    length: float


def average_trajectory(
    trajs: Sequence[Trajectory],
    center_index: int = 1,
    flag_radius: float = FLAG_RADIUS_M,
) -> List[CenterlineNode]:
    """
    Collapse several trajectories of the same passage into centerline nodes.

    Center-trajectory poses are visited in time order. Each one not yet
    flagged seeds a node: every unflagged pose of any trajectory within
    ``flag_radius`` (inclusive) of it is flagged, and the node pose is their
    mean. Poses never reached from a seed are absorbed by the node whose seed
    is closest, so the nodes partition the input poses.

    Args:
        trajs: Trajectories in a common frame
        center_index: Which trajectory drives the traversal
        flag_radius: Flagging distance in meters

    Raises:
        EmptyTrajectory: No trajectories, or the center trajectory is empty
        InvalidParameter: Bad center_index or flag_radius
    """
    if not trajs:
        raise EmptyTrajectory("average_trajectory needs at least one trajectory")
    if not 0 <= center_index < len(trajs):
        raise InvalidParameter(f"center_index {center_index} out of range for {len(trajs)} trajectories")
    if not flag_radius > 0:
        raise InvalidParameter("flag_radius must be > 0")
    if len(trajs[center_index]) == 0:
        raise EmptyTrajectory(f"center trajectory '{trajs[center_index].frame_id}' has no keyframes")

    keys = [(ti, si) for ti, traj in enumerate(trajs) for si in range(len(traj))]
    poses = [trajs[ti].samples[si].pose for ti, si in keys]
    positions = np.stack([p.t for p in poses])
    tree = cKDTree(positions)
    flat_index = {key: i for i, key in enumerate(keys)}

    owner = np.full(len(keys), -1, dtype=int)
    seeds: List[int] = []
    groups: List[List[int]] = []
    for si in range(len(trajs[center_index])):
        seed = flat_index[(center_index, si)]
        if owner[seed] >= 0:
            continue
        node_id = len(seeds)
        near = sorted(tree.query_ball_point(positions[seed], flag_radius))
        flagged = [seed] + [i for i in near if i != seed and owner[i] < 0]
        owner[flagged] = node_id
        seeds.append(seed)
        groups.append(flagged)

    leftovers = np.flatnonzero(owner < 0)
    if leftovers.size:
        seed_tree = cKDTree(positions[seeds])
        _, nearest = seed_tree.query(positions[leftovers])
        for index, node_id in zip(leftovers, np.atleast_1d(nearest)):
            owner[index] = int(node_id)
            groups[int(node_id)].append(int(index))
        logger.warning(
            "Poses outside every flag radius attached to nearest node",
            extra={"extra_fields": {"count": int(leftovers.size), "flag_radius_m": flag_radius}}
        )

    nodes = [
        CenterlineNode(
            id=node_id,
            pose=mean_pose(poses[i] for i in group),
            source_count=len(group),
            members=tuple(keys[i] for i in group),
        )
        for node_id, group in enumerate(groups)
    ]
    logger.info(
        "Centerline averaged",
        extra={"extra_fields": {
            "nodes": len(nodes),
            "poses": len(keys),
            "trajectories": len(trajs),
            "flag_radius_m": flag_radius,
        }}
    )
    return nodes


def _complete_pairs(n: int) -> np.ndarray:
    return np.array(list(combinations(range(n), 2)), dtype=int).reshape(-1, 2)


def _candidate_pairs(positions: np.ndarray) -> np.ndarray:
    """
    Index pairs that contain every Euclidean MST edge, sorted lexicographically.

    Delaunay edges are taken in the affine hull of the points (a line, plane
    or space); collinear points chain in order along their line. Too few
    points or a triangulation failure fall back to the complete graph.
    """
    n = len(positions)
    centered = positions - positions.mean(axis=0)
    _, spread, axes = np.linalg.svd(centered, full_matrices=False)
    if spread[0] <= 0.0:
        return _complete_pairs(n)
    rank = int(np.count_nonzero(spread > HULL_TOLERANCE * spread[0]))
    coords = centered @ axes[:rank].T
    if rank == 1:
        order = np.argsort(coords[:, 0], kind="stable")
        pairs = np.column_stack([order[:-1], order[1:]])
    elif n <= rank + 1:
        return _complete_pairs(n)
    else:
        try:
            tri = Delaunay(coords)
        except QhullError:
            logger.warning(
                "Delaunay triangulation failed; MST falls back to the complete graph",
                extra={"extra_fields": {"nodes": n}}
            )
            return _complete_pairs(n)
        simplices = tri.simplices
        pairs = np.concatenate([simplices[:, [i, j]] for i, j in combinations(range(simplices.shape[1]), 2)])
        if len(tri.coplanar):
            # points Qhull left out of every simplex hang off their nearest vertex
            pairs = np.concatenate([pairs, tri.coplanar[:, [0, 2]]])
    pairs = np.sort(pairs, axis=1)
    return np.unique(pairs[pairs[:, 0] != pairs[:, 1]], axis=0)


def build_mst(nodes: Sequence[CenterlineNode]) -> List[SkeletonEdge]:
    """
    Euclidean minimum spanning tree over the node positions.

    Kruskal runs over the Delaunay edges of the nodes, which always hold a
    Euclidean MST. Equal-weight edges are taken in (min id, max id)
    lexicographic order.

    Returns:
        Edges as (a, b, length) with a < b, sorted by (a, b)
    """
    graph = nx.Graph()
    graph.add_nodes_from(node.id for node in nodes)
    if len(nodes) > 1:
        positions = np.array([node.position for node in nodes])
        pairs = _candidate_pairs(positions)
        lengths = np.linalg.norm(positions[pairs[:, 0]] - positions[pairs[:, 1]], axis=1)
        candidates = sorted(
            (min(nodes[i].id, nodes[j].id), max(nodes[i].id, nodes[j].id), float(length))
            for (i, j), length in zip(pairs.tolist(), lengths)
        )
        # Kruskal's stable sort keeps insertion order among ties.
        graph.add_weighted_edges_from(candidates)

    tree = nx.minimum_spanning_tree(graph, algorithm="kruskal")
    edges = sorted(
        SkeletonEdge(min(a, b), max(a, b), float(data["weight"]))
        for a, b, data in tree.edges(data=True)
    )
    logger.debug(f"MST built over {len(nodes)} nodes, {len(edges)} edges")
    return edges
