from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from .adjust import StickMap
from .network import SurveyNetwork
from ..utils.plotting import new_figure, render_svg, save_svg

SCALE_BAR_M = 10.0


def plot_stickmap(stick_map: StickMap, net: SurveyNetwork) -> Figure:
    """
    Plan view of the caveline: one line per shot, a dot and a label per station.

    SVG group ids are ``segment-<index>`` (shot order) and ``station-<label>``.
    """
    fig = new_figure(8.0, 8.0)
    ax = fig.add_subplot(1, 1, 1)
    coords = stick_map.coordinates

    for i, seg in enumerate(net.segments):
        a, b = coords[seg.from_station], coords[seg.to_station]
        (line,) = ax.plot([a[0], b[0]], [a[1], b[1]], color="tab:brown", linewidth=1.2)
        line.set_gid(f"segment-{i}")

    for station, xyz in coords.items():
        dot = ax.scatter([xyz[0]], [xyz[1]], s=12, color="black", zorder=3)
        dot.set_gid(f"station-{station}")
        ax.annotate(
            f"{station} ({stick_map.depth_of(station):.1f} m)",
            (xyz[0], xyz[1]),
            xytext=(4, 4),
            textcoords="offset points",
            fontsize=7,
        )

    points = np.stack(list(coords.values()))
    x0 = float(points[:, 0].min())
    y0 = float(points[:, 1].min()) - 0.1 * max(1.0, float(np.ptp(points[:, 1])))
    (bar,) = ax.plot([x0, x0 + SCALE_BAR_M], [y0, y0], color="black", linewidth=3)
    bar.set_gid("scale-bar")
    ax.text(x0 + SCALE_BAR_M / 2.0, y0, f"{SCALE_BAR_M:g} m", ha="center", va="top", fontsize=8)

    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("east [m]")
    ax.set_ylabel("north [m]")
    ax.set_title(f"stick map ({stick_map.method}, anchor {stick_map.anchor})")
    fig.tight_layout()
    return fig


def stickmap_svg(stick_map: StickMap, net: SurveyNetwork) -> str:
    return render_svg(plot_stickmap(stick_map, net))


def write_stickmap(stick_map: StickMap, net: SurveyNetwork, path: Path) -> str:
    return save_svg(plot_stickmap(stick_map, net), path)
