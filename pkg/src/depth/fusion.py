"""
Synchronize a SLAM trajectory's vertical axis with the dive computer.

resample -> estimate_time_shift -> estimate_depth_regression -> apply_correction,
chained by fuse().
"""

import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy import signal, stats

from .depth_log import DepthLog
from ..geometry.pose import Pose
from ..geometry.trajectory import Trajectory
from ..utils.errors import (
    DataError,
    DegenerateRegression,
    FlatSignal,
    InsufficientOverlap,
    InvalidParameter,
    TooFewSamples,
)
from ..utils.logging import get_logger

logger = get_logger(__name__)

DEFAULT_RATE_HZ = 100.0
DEFAULT_MAX_SHIFT_S = 1200.0
MIN_OVERLAP_S = 30.0
VARIANCE_FLOOR = 1e-12
SCORE_TIE = 1e-10
CORRECTED_SUFFIX = ":depth-corrected"


@dataclass(frozen=True, eq=False)
class UniformSeries:
    start_time: float
    rate: float
    values: np.ndarray

    def __post_init__(self):
        if not self.rate > 0:
            raise InvalidParameter("series rate must be > 0")
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size == 0:
            raise DataError("series must not be empty")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "start_time", float(self.start_time))
        object.__setattr__(self, "rate", float(self.rate))

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.values.size) / self.rate

    @property
    def end_time(self) -> float:
        return self.start_time + (self.values.size - 1) / self.rate

    def shifted(self, seconds: float) -> "UniformSeries":
        return UniformSeries(self.start_time + seconds, self.rate, self.values)


@dataclass(frozen=True)
class DepthCorrection:
    """depth = scale * z + offset, after adding time_shift to SLAM timestamps."""

    time_shift: float
    scale: float
    offset: float
    residual_rms: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.scale) or self.scale == 0.0:
            raise DataError("depth correction scale must be finite and non-zero")
        if not self.residual_rms >= 0.0:
            raise DataError("depth correction residual_rms must be >= 0")

    @classmethod
    def identity(cls) -> "DepthCorrection":
        return cls(0.0, 1.0, 0.0, 0.0)

    def as_report(self) -> Dict[str, float]:
        return {
            "time_shift_s": self.time_shift,
            "scale": self.scale,
            "offset_m": self.offset,
            "residual_rms_m": self.residual_rms,
        }

    @classmethod
    def from_report(cls, report: Dict[str, float]) -> "DepthCorrection":
        return cls(
            float(report["time_shift_s"]),
            float(report["scale"]),
            float(report["offset_m"]),
            float(report.get("residual_rms_m", 0.0)),
        )


def resample(timestamps: Sequence[float], values: Sequence[float], rate: float) -> UniformSeries:
    """
    Linearly interpolate a time-stamped series onto a uniform grid.

    The grid starts at the first timestamp and never extrapolates past the
    last one; it holds floor(span * rate) + 1 samples.

    Raises:
        TooFewSamples: Fewer than two samples
        InvalidParameter: rate <= 0
    """
    times = np.asarray(timestamps, dtype=float).reshape(-1)
    values = np.asarray(values, dtype=float).reshape(-1)
    if times.size < 2:
        raise TooFewSamples(f"resampling needs at least 2 samples, got {times.size}")
    if not rate > 0:
        raise InvalidParameter("rate must be > 0")
    if times.shape != values.shape:
        raise DataError("timestamps and values differ in length")
    if not np.all(np.diff(times) > 0):
        raise DataError("timestamps must be strictly increasing")

    span = times[-1] - times[0]
    count = int(math.floor(span * rate + 1e-9)) + 1
    grid = np.minimum(times[0] + np.arange(count) / rate, times[-1])
    return UniformSeries(times[0], rate, np.interp(grid, times, values))


def resample_depth_log(log: DepthLog, rate: float) -> UniformSeries:
    return resample(log.timestamps, log.depths, rate)


def resample_trajectory_z(traj: Trajectory, rate: float) -> UniformSeries:
    return resample(traj.timestamps, traj.positions[:, 2], rate)


def _check_rates(a: UniformSeries, b: UniformSeries) -> float:
    if not math.isclose(a.rate, b.rate, rel_tol=1e-12):
        raise DataError(f"series rates differ: {a.rate} Hz vs {b.rate} Hz")
    return a.rate


def _window_sums(values: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Sum and sum of squares of values[lo:hi] for every (lo, hi) pair."""
    total = np.concatenate(([0.0], np.cumsum(values)))
    squares = np.concatenate(([0.0], np.cumsum(values * values)))
    return total[hi] - total[lo], squares[hi] - squares[lo]


def estimate_time_shift(
    slam_z: UniformSeries,
    dive_depth: UniformSeries,
    max_shift: float = DEFAULT_MAX_SHIFT_S,
    min_overlap: float = MIN_OVERLAP_S,
) -> float:
    """
    Seconds to add to SLAM timestamps to land on the dive-computer clock.

    Each candidate shift in [-max_shift, +max_shift] with at least
    ``min_overlap`` seconds of overlap is scored by the absolute Pearson
    correlation of the two series over that overlap alone: the window is
    mean-removed and normalized by its own energy. The absolute value lets z-up
    frames, which are anti-correlated with depth, lock onto the same lag.
    The peak is refined by a parabola through its neighbours; ties go to
    the smallest |shift|.

    Raises:
        InsufficientOverlap: No admissible shift leaves min_overlap seconds of overlap
        FlatSignal: Either series has variance below 1e-12
    """
    rate = _check_rates(slam_z, dive_depth)
    x = slam_z.values
    y = dive_depth.values
    min_samples = max(1, int(math.ceil(min_overlap * rate - 1e-9)))
    if min(x.size, y.size) < min_samples:
        raise InsufficientOverlap(
            f"series cover {min(x.size, y.size) / rate:.2f} s, need {min_overlap} s of overlap"
        )
    if np.var(x) < VARIANCE_FLOOR or np.var(y) < VARIANCE_FLOOR:
        raise FlatSignal("depth series has no variation to correlate")

    # global mean removal only conditions the sums; each window is re-centred below
    x = x - x.mean()
    y = y - y.mean()
    lags = signal.correlation_lags(y.size, x.size, mode="full")
    shifts = (dive_depth.start_time - slam_z.start_time) + lags / rate
    # lag L pairs x[n] with y[n + L] for n in [lo, hi)
    lo = np.maximum(0, -lags)
    hi = np.minimum(x.size, y.size - lags)
    overlap = hi - lo

    valid = (np.abs(shifts) <= max_shift + 1e-9) & (overlap >= min_samples)
    if not valid.any():
        raise InsufficientOverlap(f"no shift within +/-{max_shift} s leaves {min_overlap} s of overlap")

    products = signal.correlate(y, x, mode="full", method="fft")
    sum_x, sum_xx = _window_sums(x, lo, hi)
    sum_y, sum_yy = _window_sums(y, lo + lags, hi + lags)
    n = np.maximum(overlap, 1).astype(float)
    covariance = products - sum_x * sum_y / n
    var_x = sum_xx - sum_x * sum_x / n
    var_y = sum_yy - sum_y * sum_y / n

    valid &= (var_x > VARIANCE_FLOOR * n) & (var_y > VARIANCE_FLOOR * n)
    if not valid.any():
        raise FlatSignal("no admissible overlap window has variation to correlate")
    score = np.full(lags.size, -np.inf)
    score[valid] = np.abs(covariance[valid]) / np.sqrt(var_x[valid] * var_y[valid])
    best_score = score.max()
    ties = np.flatnonzero(score >= best_score - SCORE_TIE)
    k = int(min(ties, key=lambda i: (abs(shifts[i]), shifts[i])))

    delta = 0.0
    if 0 < k < score.size - 1 and valid[k - 1] and valid[k + 1]:
        left, mid, right = score[k - 1], score[k], score[k + 1]
        curvature = left - 2.0 * mid + right
        if curvature < 0.0:
            delta = float(np.clip(0.5 * (left - right) / curvature, -0.5, 0.5))

    shift = float(shifts[k] + delta / rate)
    logger.debug(
        "Time shift estimated",
        extra={"extra_fields": {"shift_s": shift, "peak_score": float(best_score), "lag_samples": int(lags[k])}}
    )
    return shift


def estimate_depth_regression(
    slam_z_shifted: UniformSeries,
    dive_depth: UniformSeries,
    min_overlap: float = MIN_OVERLAP_S,
) -> Tuple[float, float, float]:
    """
    Ordinary least squares fit depth = a * z + b over the overlapping span.

    The dive series is linearly interpolated at the SLAM sample times.

    Returns:
        (a, b, residual_rms)

    Raises:
        InsufficientOverlap: Overlap shorter than min_overlap seconds
        DegenerateRegression: z has variance below 1e-12 over the overlap
    """
    start = max(slam_z_shifted.start_time, dive_depth.start_time)
    end = min(slam_z_shifted.end_time, dive_depth.end_time)
    if end - start < min_overlap - 1e-9:
        raise InsufficientOverlap(f"series overlap {max(0.0, end - start):.2f} s, need {min_overlap} s")

    times = slam_z_shifted.times
    mask = (times >= start - 1e-9) & (times <= end + 1e-9)
    z = slam_z_shifted.values[mask]
    depth = np.interp(times[mask], dive_depth.times, dive_depth.values)
    if z.size < 2 or np.var(z) < VARIANCE_FLOOR:
        raise DegenerateRegression("SLAM z does not vary over the overlap; scale is undetermined")

    fit = stats.linregress(z, depth)
    a, b = float(fit.slope), float(fit.intercept)
    residual_rms = float(np.sqrt(np.mean((depth - (a * z + b)) ** 2)))
    return a, b, residual_rms


def apply_correction(traj: Trajectory, corr: DepthCorrection) -> Trajectory:
    """Shift timestamps onto the dive clock and rewrite z as depth (positive down)."""

    def corrected(pose: Pose) -> Pose:
        t = pose.t
        return Pose(np.array([t[0], t[1], corr.scale * t[2] + corr.offset]), pose.q)

    return traj.with_samples(
        [(s.timestamp + corr.time_shift, corrected(s.pose)) for s in traj.samples],
        frame_id=traj.frame_id + CORRECTED_SUFFIX,
    )


def fuse(
    traj: Trajectory,
    log: DepthLog,
    rate: float = DEFAULT_RATE_HZ,
    max_shift: float = DEFAULT_MAX_SHIFT_S,
    min_overlap: float = MIN_OVERLAP_S,
) -> Tuple[Trajectory, DepthCorrection]:
    """
    Run the full depth-fusion chain for one camera.

    Returns:
        (corrected trajectory, correction record)
    """
    slam_z = resample_trajectory_z(traj, rate)
    dive_depth = resample_depth_log(log, rate)
    shift = estimate_time_shift(slam_z, dive_depth, max_shift, min_overlap)
    a, b, residual_rms = estimate_depth_regression(slam_z.shifted(shift), dive_depth, min_overlap)
    corr = DepthCorrection(shift, a, b, residual_rms)

    logger.info(
        f"Depth fused for {traj.frame_id}",
        extra={"extra_fields": {"frame_id": traj.frame_id, "keyframes": len(traj), **corr.as_report()}}
    )
    if abs(abs(a) - 1.0) > 0.1:
        logger.warning(
            f"Depth scale far from unity for {traj.frame_id}",
            extra={"extra_fields": {"frame_id": traj.frame_id, "scale": a}}
        )
    return apply_correction(traj, corr), corr
