import numpy as np
from matplotlib.figure import Figure

from .lrud import CaveSkeleton
from .pointcloud import PointCloud
from ..utils.plotting import new_figure


def plot_skeleton(skel: CaveSkeleton, cloud: PointCloud) -> Figure:
    """Plan view (x east right, y north up) of the cloud, MST, nodes and side walls."""
    fig = new_figure(8.0, 8.0)
    ax = fig.add_subplot(1, 1, 1)

    if len(cloud):
        ax.scatter(cloud.points[:, 0], cloud.points[:, 1], s=0.5, color="0.75", label="cloud")

    positions = {node.id: node.position for node in skel.nodes}
    for edge in skel.edges:
        a, b = positions[edge.a], positions[edge.b]
        ax.plot([a[0], b[0]], [a[1], b[1]], color="tab:green", linewidth=1.5)

    if skel.nodes:
        nodes = np.stack([node.position for node in skel.nodes])
        ax.scatter(nodes[:, 0], nodes[:, 1], s=8, color="tab:green", zorder=3, label="centerline")

    for side, color in (("left", "tab:blue"), ("right", "tab:red")):
        points = [r.side(side).point for r in skel.lrud if r.side(side) is not None]
        if points:
            points = np.stack(points)
            ax.scatter(points[:, 0], points[:, 1], s=6, color=color, zorder=2, label=side)

    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("east [m]")
    ax.set_ylabel("north [m]")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="best")
    fig.tight_layout()
    return fig
