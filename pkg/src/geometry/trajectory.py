from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .pose import Pose
from ..utils.errors import DataError, ParseError, UnmatchedTimestamp
from ..utils.tabular import format_float, parse_float, read_table, read_text, render_csv, write_text

TRAJECTORY_HEADER = ("timestamp_s", "tx", "ty", "tz", "qx", "qy", "qz", "qw")


class TrajectorySample(NamedTuple):
    timestamp: float
    pose: Pose


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered keyframe poses expressed in frame ``frame_id``.

    ``camera_id`` names the sensor that produced the keyframes and survives
    every frame change.
    """

    frame_id: str
    samples: Tuple[TrajectorySample, ...]
    camera_id: str = ""

    def __post_init__(self):
        samples = tuple(TrajectorySample(float(t), p) for t, p in self.samples)
        times = np.array([s.timestamp for s in samples], dtype=float)
        if times.size > 1 and not np.all(np.diff(times) > 0):
            bad = int(np.argmin(np.diff(times) > 0)) + 1
            raise DataError(f"trajectory '{self.frame_id}': timestamps not strictly increasing at sample {bad}")
        object.__setattr__(self, "samples", samples)
        if not self.camera_id:
            object.__setattr__(self, "camera_id", self.frame_id.split(":")[0])

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[TrajectorySample]:
        return iter(self.samples)

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([s.timestamp for s in self.samples], dtype=float)

    @property
    def poses(self) -> Tuple[Pose, ...]:
        return tuple(s.pose for s in self.samples)

    @property
    def positions(self) -> np.ndarray:
        if not self.samples:
            return np.zeros((0, 3))
        return np.stack([s.pose.t for s in self.samples])

    def with_samples(self, samples: Sequence[Tuple[float, Pose]], frame_id: Optional[str] = None) -> "Trajectory":
        return Trajectory(
            frame_id=self.frame_id if frame_id is None else frame_id,
            samples=tuple(samples),
            camera_id=self.camera_id,
        )

    def map_poses(self, fn: Callable[[Pose], Pose], frame_id: Optional[str] = None) -> "Trajectory":
        return self.with_samples([(s.timestamp, fn(s.pose)) for s in self.samples], frame_id)

    def index_near(self, time: float, tolerance: float) -> int:
        """
        Index of the keyframe closest to ``time``.

        Raises:
            UnmatchedTimestamp: No keyframe lies within ``tolerance`` seconds
        """
        times = self.timestamps
        if times.size == 0:
            raise UnmatchedTimestamp(f"trajectory '{self.frame_id}' is empty")
        right = int(np.searchsorted(times, time))
        candidates = [i for i in (right - 1, right) if 0 <= i < times.size]
        best = min(candidates, key=lambda i: (abs(times[i] - time), i))
        if abs(times[best] - time) > tolerance:
            raise UnmatchedTimestamp(
                f"no keyframe of '{self.frame_id}' within {tolerance} s of t={time}"
            )
        return best


def parse_trajectory(text: str, source: str = "<trajectory>", frame_id: Optional[str] = None) -> Trajectory:
    """
    Parse a trajectory CSV document.

    ``# frame_id=...`` and ``# camera_id=...`` comment lines set the labels;
    ``frame_id`` overrides the file's own label.

    Raises:
        ParseError: Malformed rows, non-monotonic timestamps or no samples
    """
    rows, meta = read_table(text, TRAJECTORY_HEADER, source)
    samples = []
    previous = None
    for line, row in rows:
        values = [parse_float(row[c], c, line, source) for c in TRAJECTORY_HEADER]
        timestamp = values[0]
        if previous is not None and timestamp <= previous:
            raise ParseError(f"timestamp {row['timestamp_s']} not after previous {previous!r}", source, line)
        try:
            pose = Pose.from_row(values[1:])
        except ValueError as e:
            raise ParseError(str(e), source, line) from None
        samples.append((timestamp, pose))
        previous = timestamp
    if not samples:
        raise ParseError("no samples", source, None)

    stem = Path(source).stem or "trajectory"
    label = frame_id or meta.get("frame_id") or stem
    return Trajectory(frame_id=label, samples=tuple(samples), camera_id=meta.get("camera_id", stem))


def load_trajectory(path: Path, frame_id: Optional[str] = None) -> Trajectory:
    return parse_trajectory(read_text(path), source=str(path), frame_id=frame_id)


def format_trajectory(traj: Trajectory) -> str:
    rows = (
        [format_float(s.timestamp), *(format_float(v) for v in s.pose.as_row())]
        for s in traj.samples
    )
    comments = [f"frame_id={traj.frame_id}", f"camera_id={traj.camera_id}"]
    return render_csv(TRAJECTORY_HEADER, rows, comments)


def write_trajectory(traj: Trajectory, path: Path) -> str:
    return write_text(path, format_trajectory(traj))
