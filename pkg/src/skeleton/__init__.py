from .centerline import CenterlineNode, SkeletonEdge, average_trajectory, build_mst
from .export import write_skeleton
from .lrud import (
    BoundaryPoint,
    CaveSkeleton,
    LRUDRecord,
    build_skeleton,
    extract_lr,
    extract_ud,
    passage_profile,
)
from .pointcloud import (
    PointCloud,
    correct_cloud_depth,
    load_ply,
    merge_clouds,
    parse_ply,
    transform_cloud,
    write_ply,
)

__all__ = [
    "BoundaryPoint",
    "CaveSkeleton",
    "CenterlineNode",
    "LRUDRecord",
    "PointCloud",
    "SkeletonEdge",
    "average_trajectory",
    "build_mst",
    "build_skeleton",
    "correct_cloud_depth",
    "extract_lr",
    "extract_ud",
    "load_ply",
    "merge_clouds",
    "parse_ply",
    "passage_profile",
    "transform_cloud",
    "write_ply",
    "write_skeleton",
]
