import numpy as np
import pytest

from src.depth import (
    DepthCorrection,
    DepthLog,
    UniformSeries,
    apply_correction,
    estimate_depth_regression,
    estimate_time_shift,
    fuse,
    load_depth_log,
    parse_depth_log,
    resample,
    write_depth_log,
)
from src.depth.depth_log import check_spacing
from src.depth.plots import plot_depth_fusion
from src.geometry import Pose, Trajectory
from src.utils.errors import (
    DegenerateRegression,
    FlatSignal,
    InsufficientOverlap,
    ParseError,
    TooFewSamples,
)
from src.utils.plotting import render_svg

KNOT_SPACING_S = 10.0


def dive_profile(seed: int = 3, start: float = -300.0, end: float = 2100.0):
    """Piecewise-linear true depth with knots on the dive computer's 10 s grid."""
    rng = np.random.default_rng(seed)
    knots = np.arange(start, end + KNOT_SPACING_S, KNOT_SPACING_S)
    depths = np.clip(20.0 + np.cumsum(rng.normal(0.0, 0.8, knots.size)), 3.0, 45.0)
    return knots, depths


def slam_trajectory(knots, depths, shift, scale, offset, duration=1500.0, spacing=0.25):
    """Keyframes on the SLAM clock whose z satisfies depth = scale * z + offset at true time t + shift."""
    times = np.arange(0.0, duration + spacing, spacing)
    true_depth = np.interp(times + shift, knots, depths)
    z = (true_depth - offset) / scale
    samples = tuple(
        (t, Pose([0.01 * i, -0.02 * i, zi], [0.0, 0.0, 0.0, 1.0])) for i, (t, zi) in enumerate(zip(times, z))
    )
    return Trajectory("left:slam", samples, "left")


def test_resample_linear_ramp():
    series = resample([0.0, 10.0], [0.0, 10.0], 1.0)
    assert len(series) == 11
    np.testing.assert_allclose(series.values, np.arange(11.0))


def test_resample_constant_and_too_few_samples():
    series = resample([0.0, 2.5, 5.0], [3.0, 3.0, 3.0], 2.0)
    assert len(series) == 11
    assert np.all(series.values == 3.0)
    with pytest.raises(TooFewSamples):
        resample([1.0], [1.0], 10.0)


def test_resample_matches_pointwise_interpolation():
    rng = np.random.default_rng(5)
    times = np.cumsum(rng.uniform(0.5, 3.0, 40))
    values = rng.normal(0, 5, 40)
    series = resample(times, values, 7.0)
    assert series.end_time <= times[-1] + 1e-9
    np.testing.assert_allclose(series.values, np.interp(series.times, times, values), atol=1e-12)


def test_time_shift_recovers_known_lag():
    knots, depths = dive_profile()
    traj = slam_trajectory(knots, depths, shift=37.0, scale=1.0, offset=0.0)
    slam_z = resample(traj.timestamps, traj.positions[:, 2], 100.0)
    dive = resample(knots, depths, 100.0)
    assert estimate_time_shift(slam_z, dive, 1200.0) == pytest.approx(37.0, abs=0.02)


def test_short_trajectory_is_not_pulled_toward_a_deep_excursion():
    knots, depths = dive_profile(seed=5)
    depths = depths + np.where((knots > 900.0) & (knots < 1300.0), 25.0, 0.0)
    traj = slam_trajectory(knots, depths, shift=200.0, scale=1.0, offset=0.0, duration=300.0)
    slam_z = resample(traj.timestamps, traj.positions[:, 2], 100.0)
    dive = resample(knots, depths, 100.0)
    assert estimate_time_shift(slam_z, dive, 1200.0) == pytest.approx(200.0, abs=0.02)


def test_time_shift_of_identical_series_is_zero():
    knots, depths = dive_profile()
    series = resample(knots, depths, 10.0)
    assert estimate_time_shift(series, series, 600.0) == pytest.approx(0.0, abs=1e-9)


def test_time_shift_is_antisymmetric():
    knots, depths = dive_profile(seed=8)
    traj = slam_trajectory(knots, depths, shift=-212.0, scale=1.0, offset=0.0)
    slam_z = resample(traj.timestamps, traj.positions[:, 2], 100.0)
    dive = resample(knots, depths, 100.0)
    forward = estimate_time_shift(slam_z, dive, 1200.0)
    backward = estimate_time_shift(dive, slam_z, 1200.0)
    assert forward == pytest.approx(-212.0, abs=0.02)
    assert backward == pytest.approx(-forward, abs=0.02)


def test_time_shift_locks_on_for_z_up_frames():
    knots, depths = dive_profile(seed=11)
    traj = slam_trajectory(knots, depths, shift=250.0, scale=-1.0, offset=19.4)
    slam_z = resample(traj.timestamps, traj.positions[:, 2], 100.0)
    dive = resample(knots, depths, 100.0)
    assert estimate_time_shift(slam_z, dive, 1200.0) == pytest.approx(250.0, abs=0.02)


def test_flat_signal_rejected():
    flat = UniformSeries(0.0, 10.0, np.full(1000, 5.0))
    _, depths = dive_profile()
    dive = UniformSeries(0.0, 10.0, np.interp(np.arange(1000) / 10.0, np.arange(depths.size) * 10.0, depths))
    with pytest.raises(FlatSignal):
        estimate_time_shift(flat, dive, 60.0)


def test_regression_of_z_up_frame_is_exact():
    rng = np.random.default_rng(2)
    depth = rng.uniform(10, 30, 5000)
    z = -depth + 19.4
    a, b, rms = estimate_depth_regression(UniformSeries(0.0, 100.0, z), UniformSeries(0.0, 100.0, depth))
    assert a == pytest.approx(-1.0, abs=1e-9)
    assert b == pytest.approx(19.4, abs=1e-9)
    assert rms < 1e-9


def test_regression_identity_and_degenerate():
    depth = np.linspace(10, 20, 4000)
    a, b, rms = estimate_depth_regression(UniformSeries(0.0, 100.0, depth), UniformSeries(0.0, 100.0, depth))
    assert (a, b) == (pytest.approx(1.0), pytest.approx(0.0, abs=1e-9))
    with pytest.raises(DegenerateRegression):
        estimate_depth_regression(UniformSeries(0.0, 100.0, np.full(4000, 2.0)), UniformSeries(0.0, 100.0, depth))


def test_regression_needs_overlap():
    depth = np.linspace(10, 20, 4000)
    with pytest.raises(InsufficientOverlap):
        estimate_depth_regression(UniformSeries(100.0, 100.0, depth), UniformSeries(0.0, 100.0, depth))


def test_apply_correction_identity_and_shift():
    knots, depths = dive_profile()
    traj = slam_trajectory(knots, depths, shift=0.0, scale=1.0, offset=0.0, duration=60.0)

    same = apply_correction(traj, DepthCorrection.identity())
    assert same.frame_id == "left:slam:depth-corrected"
    assert same.camera_id == "left"
    np.testing.assert_array_equal(same.positions, traj.positions)

    moved = apply_correction(traj, DepthCorrection(578.4, -1.0, 19.39))
    np.testing.assert_allclose(moved.timestamps, traj.timestamps + 578.4)
    np.testing.assert_array_equal(moved.positions[:, :2], traj.positions[:, :2])
    np.testing.assert_allclose(moved.positions[:, 2], 19.39 - traj.positions[:, 2])
    for before, after in zip(traj.poses, moved.poses):
        np.testing.assert_array_equal(before.q, after.q)


def test_fuse_recovers_synthetic_distortion():
    knots, depths = dive_profile(seed=21)
    traj = slam_trajectory(knots, depths, shift=120.0, scale=-1.0, offset=19.36)
    rng = np.random.default_rng(4)
    log = DepthLog(knots, np.clip(depths + rng.normal(0, 0.05, depths.size), 0, None))

    corrected, corr = fuse(traj, log)
    assert corr.time_shift == pytest.approx(120.0, abs=0.1)
    assert corr.scale < 0
    assert corr.offset == pytest.approx(19.36, abs=0.05)

    truth = np.interp(corrected.timestamps, knots, depths)
    assert np.sqrt(np.mean((corrected.positions[:, 2] - truth) ** 2)) < 2 * 0.05


def test_fuse_is_idempotent_in_effect():
    knots, depths = dive_profile(seed=13)
    traj = slam_trajectory(knots, depths, shift=75.0, scale=1.0, offset=-3.0)
    log = DepthLog(knots, depths)
    once, _ = fuse(traj, log)
    _, again = fuse(once, log)
    assert again.time_shift == pytest.approx(0.0, abs=0.02)
    assert again.scale == pytest.approx(1.0, abs=1e-3)
    assert again.offset == pytest.approx(0.0, abs=0.02)


def test_fuse_with_short_overlap_fails():
    knots, depths = dive_profile()
    traj = slam_trajectory(knots, depths, shift=0.0, scale=1.0, offset=0.0, duration=20.0)
    with pytest.raises(InsufficientOverlap):
        fuse(traj, DepthLog(knots, depths))


def test_depth_log_parse_errors_carry_lines():
    with pytest.raises(ParseError) as info:
        parse_depth_log("timestamp_s,depth_m\n0,1.0\n10,-2.0\n", source="dive.csv")
    assert info.value.line == 3
    with pytest.raises(ParseError) as info:
        parse_depth_log("timestamp_s,depth_m\n0,1.0\n0,2.0\n", source="dive.csv")
    assert info.value.line == 3


def test_depth_log_file_round_trip(tmp_path):
    knots, depths = dive_profile()
    path = write_depth_log(DepthLog(knots, depths), tmp_path / "depth.csv")
    log = load_depth_log(path)
    np.testing.assert_array_equal(log.timestamps, knots)
    np.testing.assert_array_equal(log.depths, depths)


def test_irregular_spacing_is_flagged():
    log = DepthLog(np.arange(0.0, 100.0, 1.0), np.ones(100))
    assert check_spacing(log, 10.0) is False
    assert check_spacing(DepthLog(np.arange(0.0, 100.0, 10.0), np.ones(10)), 10.0) is True


def test_fusion_plot_renders_deterministically():
    knots, depths = dive_profile()
    traj = slam_trajectory(knots, depths, shift=40.0, scale=1.0, offset=0.0, duration=300.0)
    log = DepthLog(knots, depths)
    corrected, corr = fuse(traj, log, max_shift=200.0)
    first = render_svg(plot_depth_fusion(traj, corrected, log, corr))
    second = render_svg(plot_depth_fusion(traj, corrected, log, corr))
    assert "<svg" in first
    assert first == second
