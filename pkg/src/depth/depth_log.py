from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..utils.errors import DataError, ParseError
from ..utils.logging import get_logger
from ..utils.tabular import format_float, parse_float, read_table, read_text, render_csv, write_text

logger = get_logger(__name__)

DEPTH_LOG_HEADER = ("timestamp_s", "depth_m")
NOMINAL_SPACING_S = 10.0


@dataclass(frozen=True, eq=False)
class DepthLog:
    """Dive-computer depth record: strictly increasing times, depths >= 0 (positive down)."""

    timestamps: np.ndarray
    depths: np.ndarray

    def __post_init__(self):
        times = np.array(self.timestamps, dtype=float).reshape(-1)
        depths = np.array(self.depths, dtype=float).reshape(-1)
        if times.shape != depths.shape:
            raise DataError("depth log: timestamps and depths differ in length")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise DataError("depth log: timestamps not strictly increasing")
        if np.any(depths < 0):
            raise DataError("depth log: negative depth")
        times.setflags(write=False)
        depths.setflags(write=False)
        object.__setattr__(self, "timestamps", times)
        object.__setattr__(self, "depths", depths)

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def median_spacing(self) -> float:
        if self.timestamps.size < 2:
            return float("nan")
        return float(np.median(np.diff(self.timestamps)))


def check_spacing(log: DepthLog, nominal: float = NOMINAL_SPACING_S, source: str = "<depth log>") -> bool:
    """Warn when the median sample spacing is more than 50% off nominal."""
    spacing = log.median_spacing()
    if np.isfinite(spacing) and abs(spacing - nominal) > 0.5 * nominal:
        logger.warning(
            f"Depth log spacing deviates from nominal: {source}",
            extra={"extra_fields": {"source": source, "median_spacing_s": spacing, "nominal_s": nominal}}
        )
        return False
    return True


def parse_depth_log(text: str, source: str = "<depth log>", nominal_spacing: float = NOMINAL_SPACING_S) -> DepthLog:
    """
    Parse a ``timestamp_s,depth_m`` CSV document.

    Raises:
        ParseError: Malformed rows, non-increasing timestamps, negative depths, no samples
    """
    rows, _ = read_table(text, DEPTH_LOG_HEADER, source)
    times, depths = [], []
    for line, row in rows:
        t = parse_float(row["timestamp_s"], "timestamp_s", line, source)
        d = parse_float(row["depth_m"], "depth_m", line, source)
        if times and t <= times[-1]:
            raise ParseError(f"timestamp {row['timestamp_s']} not after previous {times[-1]!r}", source, line)
        if d < 0:
            raise ParseError(f"negative depth {row['depth_m']}", source, line)
        times.append(t)
        depths.append(d)
    if not times:
        raise ParseError("no samples", source, None)
    log = DepthLog(np.array(times), np.array(depths))
    check_spacing(log, nominal_spacing, source)
    return log


def load_depth_log(path: Path, nominal_spacing: float = NOMINAL_SPACING_S) -> DepthLog:
    return parse_depth_log(read_text(path), source=str(path), nominal_spacing=nominal_spacing)


def format_depth_log(log: DepthLog) -> str:
    rows = ([format_float(t), format_float(d)] for t, d in zip(log.timestamps, log.depths))
    return render_csv(DEPTH_LOG_HEADER, rows)


def write_depth_log(log: DepthLog, path: Path) -> str:
    return write_text(path, format_depth_log(log))
