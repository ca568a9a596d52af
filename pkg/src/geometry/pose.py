"""
Rigid-body pose algebra.

Conventions:
    Pose.t: (3,) translation in meters
    Pose.q: (4,) unit quaternion, scalar last (x, y, z, w), kept on the w >= 0 hemisphere
    compose(a, b) applies b first, then a (matrix product A @ B)
    Euler angles are intrinsic Z-Y-X: yaw about z, then pitch about y, then roll about x
"""

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from ..utils.errors import DegenerateMean, EmptyInput

_UNIT_EPS = 4.0 * np.finfo(float).eps
GIMBAL_TOLERANCE = 1e-6


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _canonical_quat(q: Sequence[float]) -> np.ndarray:
    q = np.array(q, dtype=float).reshape(4)
    norm = float(np.linalg.norm(q))
    if not math.isfinite(norm) or norm == 0.0:
        raise ValueError("quaternion must be finite and non-zero")
    # Leave already-unit inputs bit-for-bit alone so serialized poses round-trip exactly.
    if abs(norm - 1.0) > _UNIT_EPS:
        q = q / norm
    if q[3] < 0.0:
        q = -q
    return q


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: x_out = R(q) @ x_in + t."""

    t: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        object.__setattr__(self, "t", _frozen(t))
        object.__setattr__(self, "q", _frozen(_canonical_quat(self.q)))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]))

    @classmethod
    def from_translation(cls, t: Sequence[float]) -> "Pose":
        return cls(t, np.array([0.0, 0.0, 0.0, 1.0]))

    @classmethod
    def from_rotation(cls, rotation: Rotation, t: Sequence[float] = (0.0, 0.0, 0.0)) -> "Pose":
        return cls(t, rotation.as_quat())

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "Pose":
        matrix = np.asarray(matrix, dtype=float)
        return cls(matrix[:3, 3], Rotation.from_matrix(matrix[:3, :3]).as_quat())

    @classmethod
    def from_row(cls, row: Sequence[float]) -> "Pose":
        """Build from (tx, ty, tz, qx, qy, qz, qw)."""
        return cls(row[0:3], row[3:7])

    @property
    def rotation(self) -> Rotation:
        return Rotation.from_quat(self.q)

    def as_matrix(self) -> np.ndarray:
        matrix = np.eye(4)
        matrix[:3, :3] = self.rotation.as_matrix()
        matrix[:3, 3] = self.t
        return matrix

    def as_row(self) -> tuple:
        return tuple(float(v) for v in (*self.t, *self.q))

    def with_translation(self, t: Sequence[float]) -> "Pose":
        return Pose(t, self.q)

    def transform_points(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        return self.rotation.apply(points) + self.t

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        """Equality up to tolerance, treating q and -q as the same rotation."""
        if not np.allclose(self.t, other.t, rtol=0.0, atol=atol):
            return False
        return bool(min(np.max(np.abs(self.q - other.q)), np.max(np.abs(self.q + other.q))) <= atol)

    def __repr__(self) -> str:
        t = ", ".join(f"{v:.6g}" for v in self.t)
        q = ", ".join(f"{v:.6g}" for v in self.q)
        return f"Pose(t=({t}), q=({q}))"


@dataclass(frozen=True)
class EulerAngles:
    """Intrinsic Z-Y-X angles in radians."""

    roll: float
    pitch: float
    yaw: float

    def as_rotation(self) -> Rotation:
        return Rotation.from_euler("ZYX", [self.yaw, self.pitch, self.roll])

    def as_tuple(self) -> tuple:
        return (self.roll, self.pitch, self.yaw)


def wrap_angle(angle: float) -> float:
    """Map an angle in radians to (-pi, pi]."""
    wrapped = math.remainder(float(angle), 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def compose(a: Pose, b: Pose) -> Pose:
    """Apply b, then a."""
    ra = a.rotation
    return Pose(a.t + ra.apply(b.t), (ra * b.rotation).as_quat())


def invert(p: Pose) -> Pose:
    inverse = p.rotation.inv()
    return Pose(-inverse.apply(p.t), inverse.as_quat())


def euler_angles(p: Pose) -> EulerAngles:
    """
    Decompose the rotation of ``p`` into intrinsic Z-Y-X angles.

    Within GIMBAL_TOLERANCE of pitch = +/- pi/2 roll is set to 0 and the
    remaining freedom is folded into yaw.
    """
    m = p.rotation.as_matrix()
    sin_pitch = float(np.clip(-m[2, 0], -1.0, 1.0))
    cos_pitch = math.sqrt(max(0.0, 1.0 - sin_pitch * sin_pitch))
    pitch = math.atan2(sin_pitch, cos_pitch)
    if abs(abs(pitch) - math.pi / 2.0) < GIMBAL_TOLERANCE:
        roll = 0.0
        yaw = math.atan2(-m[0, 1], m[1, 1])
    else:
        roll = math.atan2(m[2, 1], m[2, 2])
        yaw = math.atan2(m[1, 0], m[0, 0])
    return EulerAngles(roll=wrap_angle(roll), pitch=pitch, yaw=wrap_angle(yaw))


def pose_from_euler(t: Sequence[float], angles: EulerAngles) -> Pose:
    return Pose.from_rotation(angles.as_rotation(), t)


def mean_pose(poses: Iterable[Pose]) -> Pose:
    """
    Average a set of poses.

    Translation is the arithmetic mean. Rotation is the chordal L2 mean:
    quaternions are flipped onto the hemisphere of the first one, summed
    and renormalized.

    Raises:
        EmptyInput: No poses given
        DegenerateMean: The aligned quaternions cancel out
    """
    poses = list(poses)
    if not poses:
        raise EmptyInput("mean_pose needs at least one pose")
    if len(poses) == 1:
        return poses[0]

    translations = np.stack([p.t for p in poses])
    quats = np.stack([p.q for p in poses])
    signs = np.where(quats @ quats[0] < 0.0, -1.0, 1.0)
    total = (quats * signs[:, None]).sum(axis=0)
    if np.linalg.norm(total) < 1e-12:
        raise DegenerateMean("rotations cancel out; mean is undefined")
    return Pose(translations.mean(axis=0), total / np.linalg.norm(total))


def circular_mean(angles: Iterable[float]) -> float:
    """
    Mean direction of angles in radians, in (-pi, pi].

    Raises:
        EmptyInput: No angles given
        DegenerateMean: Mean resultant length below 1e-9
    """
    angles = np.asarray(list(angles), dtype=float)
    if angles.size == 0:
        raise EmptyInput("circular_mean needs at least one angle")
    s = float(np.mean(np.sin(angles)))
    c = float(np.mean(np.cos(angles)))
    if math.hypot(s, c) < 1e-9:
        raise DegenerateMean("angles are balanced around the circle; mean direction is undefined")
    return wrap_angle(math.atan2(s, c))


def angular_difference(a: float, b: float) -> float:
    """Signed shortest rotation from b to a, in (-pi, pi]."""
    return wrap_angle(a - b)


def rotation_angle_between(a: Pose, b: Pose) -> float:
    """Angle in radians of the relative rotation between two poses."""
    return float((a.rotation.inv() * b.rotation).magnitude())
