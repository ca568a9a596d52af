import numpy as np
from matplotlib.figure import Figure

from .depth_log import DepthLog
from .fusion import DepthCorrection
from ..geometry.trajectory import Trajectory
from ..utils.plotting import new_figure


def plot_depth_fusion(raw: Trajectory, corrected: Trajectory, log: DepthLog, corr: DepthCorrection) -> Figure:
    """
    Four panels: raw series, time-shifted series, regression, corrected depth.

    Args:
        raw: Trajectory before correction (SLAM clock, SLAM z)
        corrected: Output of apply_correction
        log: Dive-computer depth log
        corr: The correction that maps raw onto corrected
    """
    fig = new_figure(10.0, 8.0)
    axes = fig.subplots(2, 2)
    raw_t = raw.timestamps
    raw_z = raw.positions[:, 2]

    ax = axes[0, 0]
    ax.plot(log.timestamps, log.depths, color="tab:blue", label="dive computer")
    ax.plot(raw_t, raw_z, color="tab:red", label="SLAM z")
    ax.set_title("raw")
    ax.set_xlabel("time [s]")
    ax.legend(loc="best")

    ax = axes[0, 1]
    ax.plot(log.timestamps, log.depths, color="tab:blue")
    ax.plot(raw_t + corr.time_shift, raw_z, color="tab:red")
    ax.set_title(f"shifted by {corr.time_shift:.2f} s")
    ax.set_xlabel("time [s]")

    ax = axes[1, 0]
    depth_at = np.interp(raw_t + corr.time_shift, log.timestamps, log.depths)
    ax.scatter(raw_z, depth_at, s=2, color="tab:blue")
    line = np.array([raw_z.min(), raw_z.max()])
    ax.plot(line, corr.scale * line + corr.offset, color="tab:red")
    ax.set_title(f"depth = {corr.scale:.4f} z + {corr.offset:.3f}")
    ax.set_xlabel("SLAM z [m]")
    ax.set_ylabel("depth [m]")

    ax = axes[1, 1]
    ax.plot(log.timestamps, log.depths, color="tab:blue")
    ax.plot(corrected.timestamps, corrected.positions[:, 2], color="tab:red")
    ax.set_title(f"corrected, rms {corr.residual_rms:.3f} m")
    ax.set_xlabel("time [s]")
    for ax in (axes[0, 0], axes[0, 1], axes[1, 1]):
        ax.invert_yaxis()

    fig.tight_layout()
    return fig
