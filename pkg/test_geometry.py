import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from src.geometry import (
    EulerAngles,
    Pose,
    Trajectory,
    circular_mean,
    compose,
    euler_angles,
    format_trajectory,
    invert,
    load_trajectory,
    mean_pose,
    parse_trajectory,
    pose_from_euler,
    wrap_angle,
    write_trajectory,
)
from src.utils.errors import DegenerateMean, EmptyInput, ParseError, UnmatchedTimestamp


def random_pose(rng: np.random.Generator) -> Pose:
    return Pose(rng.uniform(-50, 50, 3), Rotation.random(random_state=rng).as_quat())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def test_compose_matches_homogeneous_matrices(rng):
    for _ in range(500):
        a, b = random_pose(rng), random_pose(rng)
        expected = a.as_matrix() @ b.as_matrix()
        np.testing.assert_allclose(compose(a, b).as_matrix(), expected, atol=1e-9)


def test_invert_matches_matrix_inverse(rng):
    for _ in range(500):
        p = random_pose(rng)
        np.testing.assert_allclose(invert(p).as_matrix(), np.linalg.inv(p.as_matrix()), atol=1e-9)
        assert compose(p, invert(p)).allclose(Pose.identity())


def test_compose_is_associative(rng):
    for _ in range(200):
        a, b, c = (random_pose(rng) for _ in range(3))
        assert compose(compose(a, b), c).allclose(compose(a, compose(b, c)))


def test_identity_and_translation_inverse():
    p = Pose([1.0, 2.0, 3.0], [0.0, 0.0, 0.0, 1.0])
    assert compose(Pose.identity(), p).allclose(p)
    assert invert(Pose.identity()).allclose(Pose.identity())
    np.testing.assert_allclose(invert(Pose.from_translation([1, 2, 3])).t, [-1, -2, -3])


def test_quaternion_is_unit_and_canonical():
    p = Pose([0, 0, 0], [0.0, 0.0, 2.0, -2.0])
    assert p.q[3] >= 0
    assert abs(np.linalg.norm(p.q) - 1.0) < 1e-12


def test_euler_of_yaw_rotation():
    p = Pose.from_rotation(Rotation.from_euler("z", 90, degrees=True))
    angles = euler_angles(p)
    assert angles.yaw == pytest.approx(math.pi / 2)
    assert angles.roll == pytest.approx(0.0, abs=1e-12)
    assert angles.pitch == pytest.approx(0.0, abs=1e-12)
    assert euler_angles(Pose.identity()).as_tuple() == (0.0, 0.0, 0.0)


def test_euler_round_trip(rng):
    for _ in range(500):
        p = random_pose(rng)
        angles = euler_angles(p)
        assert -math.pi / 2 <= angles.pitch <= math.pi / 2
        assert -math.pi < angles.yaw <= math.pi
        assert pose_from_euler(p.t, angles).allclose(p)


def test_euler_at_gimbal_lock_folds_roll_into_yaw():
    p = pose_from_euler([0, 0, 0], EulerAngles(roll=0.3, pitch=math.pi / 2, yaw=0.2))
    angles = euler_angles(p)
    assert angles.roll == 0.0
    assert angles.pitch == pytest.approx(math.pi / 2)
    assert pose_from_euler([0, 0, 0], angles).allclose(p, atol=1e-7)


def test_mean_pose_simple_cases():
    p = Pose([1, 2, 3], Rotation.from_euler("x", 20, degrees=True).as_quat())
    assert mean_pose([p]) is p
    a = Pose.from_translation([0, 0, 0])
    b = Pose.from_translation([2, 0, 0])
    np.testing.assert_allclose(mean_pose([a, b]).t, [1, 0, 0])
    assert mean_pose([p] * 5).allclose(p, atol=1e-12)
    with pytest.raises(EmptyInput):
        mean_pose([])


def test_mean_pose_ignores_order_and_quaternion_sign(rng):
    base = Rotation.from_euler("ZYX", [0.4, 0.1, -0.2])
    poses = [
        Pose.from_rotation(base * Rotation.from_rotvec(rng.normal(0, 0.05, 3)), rng.normal(0, 1, 3))
        for _ in range(10)
    ]
    reference = mean_pose(poses)
    assert mean_pose(poses[::-1]).allclose(reference, atol=1e-12)
    flipped = [Pose(p.t, -p.q) for p in poses]
    assert mean_pose(flipped).allclose(reference, atol=1e-12)


def test_mean_pose_minimizes_chordal_distance(rng):
    base = Rotation.from_euler("z", 30, degrees=True)
    quats = np.stack([
        (base * Rotation.from_rotvec(rng.uniform(-1, 1, 3) * math.radians(10) / math.sqrt(3))).as_quat()
        for _ in range(10)
    ])
    mean_q = mean_pose([Pose([0, 0, 0], q) for q in quats]).q

    def cost(q):
        return sum(min(np.sum((q - qi) ** 2), np.sum((q + qi) ** 2)) for qi in quats)

    best = cost(mean_q)
    for perturbation in Rotation.from_rotvec(rng.normal(0, math.radians(0.5), (200, 3))):
        candidate = (perturbation * Rotation.from_quat(mean_q)).as_quat()
        assert cost(candidate) >= best - 1e-12


def test_circular_mean():
    assert circular_mean([0.1, 0.1]) == pytest.approx(0.1)
    assert circular_mean([math.radians(175), math.radians(-175)]) == pytest.approx(math.pi)
    with pytest.raises(DegenerateMean):
        circular_mean([0.0, math.pi])
    with pytest.raises(EmptyInput):
        circular_mean([])


def test_wrap_angle_range():
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(0.5) == 0.5


TRAJECTORY_TEXT = (
    "# frame_id=left:slam\n"
    "# camera_id=left\n"
    "timestamp_s,tx,ty,tz,qx,qy,qz,qw\n"
    "0.0,0.0,0.0,1.0,0.0,0.0,0.0,1.0\n"
    "0.25,0.1,0.0,1.5,0.0,0.0,0.0,1.0\n"
    "0.5,0.2,0.1,2.0,0.0,0.0,0.0,1.0\n"
)


def test_parse_trajectory_reads_labels():
    traj = parse_trajectory(TRAJECTORY_TEXT, source="left.csv")
    assert traj.frame_id == "left:slam"
    assert traj.camera_id == "left"
    assert len(traj) == 3
    np.testing.assert_allclose(traj.positions[:, 2], [1.0, 1.5, 2.0])


def test_trajectory_labels_default_to_file_stem(tmp_path):
    path = tmp_path / "right.csv"
    path.write_text(TRAJECTORY_TEXT.split("\n", 2)[2])
    traj = load_trajectory(path)
    assert traj.frame_id == "right"
    assert traj.camera_id == "right"


def test_trajectory_write_and_reload_preserves_text(tmp_path):
    traj = parse_trajectory(TRAJECTORY_TEXT, source="left.csv")
    path = write_trajectory(traj, tmp_path / "out.csv")
    reloaded = load_trajectory(path)
    assert format_trajectory(reloaded) == format_trajectory(traj)


@pytest.mark.parametrize(
    "row, line",
    [
        ("0.25,0.1,0.0,1.5,0.0,0.0,0.0,1.0\n", 7),
        ("0.75,abc,0.0,1.5,0.0,0.0,0.0,1.0\n", 7),
        ("0.75,0.1,0.0,1.5,0.0,0.0,1.0\n", 7),
    ],
)
def test_malformed_trajectory_rows_report_line(row, line):
    with pytest.raises(ParseError) as info:
        parse_trajectory(TRAJECTORY_TEXT + row, source="bad.csv")
    assert info.value.line == line
    assert str(info.value).startswith(f"bad.csv:{line}:")


def test_empty_trajectory_rejected():
    with pytest.raises(ParseError):
        parse_trajectory("timestamp_s,tx,ty,tz,qx,qy,qz,qw\n")


def test_index_near():
    traj = parse_trajectory(TRAJECTORY_TEXT)
    assert traj.index_near(0.26, 0.02) == 1
    assert traj.index_near(0.5, 0.0) == 2
    with pytest.raises(UnmatchedTimestamp):
        traj.index_near(0.375, 0.1)


def test_map_poses_keeps_camera_id():
    traj = parse_trajectory(TRAJECTORY_TEXT)
    moved = traj.map_poses(lambda p: compose(Pose.from_translation([1, 0, 0]), p), frame_id="world")
    assert moved.frame_id == "world"
    assert moved.camera_id == "left"
    assert isinstance(moved, Trajectory)
    np.testing.assert_allclose(moved.positions[:, 0], traj.positions[:, 0] + 1)
