import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from src.geometry import Pose, Trajectory
from src.recon import (
    AreaSelection,
    area_report,
    export_manifest,
    load_manifest,
    parse_manifest,
    select_keyframes,
    write_manifest,
)
from src.utils.errors import InvalidParameter, ParseError, PatternError


def wandering_trajectory(rng, frame_id, count=300) -> Trajectory:
    steps = rng.normal(0.0, 0.3, (count, 3))
    positions = np.cumsum(steps, axis=0) + [0.0, 0.0, 20.0]
    rotations = Rotation.random(count, random_state=rng).as_quat()
    return Trajectory(frame_id, tuple((0.2 * i + 0.05, Pose(p, q)) for i, (p, q) in enumerate(zip(positions, rotations))))


@pytest.fixture
def trajectories():
    rng = np.random.default_rng(77)
    return [wandering_trajectory(rng, name) for name in ("left:world", "right:world", "center:world")]


def test_selection_matches_brute_force(trajectories):
    center = trajectories[2].samples[150].pose
    selection = select_keyframes(trajectories, center, 2.5)

    expected = sorted(
        (traj.camera_id, s.timestamp)
        for traj in trajectories
        for s in traj.samples
        if np.linalg.norm(s.pose.t - center.t) <= 2.5
    )
    assert [(m.camera_id, m.timestamp) for m in selection.members] == expected
    assert ("center", trajectories[2].samples[150].timestamp) in expected


def test_selection_grows_with_radius(trajectories):
    center = trajectories[0].samples[40].pose
    sets = [
        {(m.camera_id, m.timestamp) for m in select_keyframes(trajectories, center, r).members}
        for r in (1.0, 2.5, 5.0)
    ]
    assert sets[0] <= sets[1] <= sets[2]
    assert len(sets[0]) >= 1


def test_orientation_does_not_matter(trajectories):
    pose = trajectories[1].samples[10].pose
    turned = Pose(pose.t, Rotation.from_euler("z", 120, degrees=True).as_quat())
    a = select_keyframes(trajectories, pose, 2.5)
    b = select_keyframes(trajectories, turned, 2.5)
    assert [(m.camera_id, m.timestamp) for m in a.members] == [(m.camera_id, m.timestamp) for m in b.members]


def test_empty_selection_is_not_an_error(trajectories):
    selection = select_keyframes(trajectories, Pose.from_translation([1e4, 0, 0]), 2.5)
    assert selection.empty
    assert export_manifest(selection).splitlines() == [
        "image_id,camera_id,timestamp_s,tx,ty,tz,qx,qy,qz,qw"
    ]
    assert area_report(selection)["empty"] is True


def test_radius_must_be_positive(trajectories):
    with pytest.raises(InvalidParameter):
        select_keyframes(trajectories, Pose.identity(), 0.0)


def test_manifest_names_images_with_pattern(trajectories):
    selection = select_keyframes(trajectories, trajectories[0].samples[0].pose, 1.0)
    first = selection.members[0]
    row = export_manifest(selection, "img/{camera_id}_{timestamp:.3f}.jpg").splitlines()[1]
    assert row.startswith(f"img/{first.camera_id}_{first.timestamp:.3f}.jpg,{first.camera_id},")


@pytest.mark.parametrize("pattern", ["{camera_id}.png", "{timestamp}.png", "{camera_id}/{frame}{timestamp}", "{camera_id/{timestamp}"])
def test_bad_patterns(trajectories, pattern):
    selection = select_keyframes(trajectories, trajectories[0].samples[0].pose, 1.0)
    with pytest.raises(PatternError):
        export_manifest(selection, pattern)


def test_manifest_file_round_trip(tmp_path, trajectories):
    selection = select_keyframes(trajectories, trajectories[2].samples[100].pose, 2.5)
    path = write_manifest(selection, tmp_path / "area" / "poses.csv")
    members = load_manifest(path)
    assert len(members) == len(selection.members)
    for original, loaded in zip(selection.members, members):
        assert loaded.camera_id == original.camera_id
        assert loaded.timestamp == original.timestamp
        assert loaded.pose.allclose(original.pose, atol=1e-12)


def test_malformed_manifest_row():
    text = "image_id,camera_id,timestamp_s,tx,ty,tz,qx,qy,qz,qw\na.png,left,0.5,0,0,0,0,0,0,0\n"
    with pytest.raises(ParseError) as info:
        parse_manifest(text, source="poses.csv")
    assert info.value.line == 2


def test_area_report_counts_cameras(trajectories):
    selection = select_keyframes(trajectories, trajectories[2].samples[150].pose, 5.0)
    report = area_report(selection, name="junction")
    assert report["name"] == "junction"
    assert sum(report["per_camera"].values()) == report["members"] == len(selection.members)
    assert isinstance(selection, AreaSelection)
