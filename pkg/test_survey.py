import math

import numpy as np
import pytest

from src.survey import (
    SurveyNetwork,
    SurveySegment,
    adjust_loops,
    dead_reckon,
    format_stations,
    load_survey,
    parse_survey,
    segment_displacement,
    stick_map_report,
    stickmap_svg,
    weighted_misfit,
    write_survey,
)
from src.survey.network import apply_declination
from src.utils.errors import (
    DisconnectedStation,
    InconsistentSegment,
    InvalidParameter,
    ParseError,
    RangeError,
)

HEADER = "from,to,length_m,azimuth_in_deg,azimuth_out_deg,depth_from_m,depth_to_m\n"

TRIANGLE = (
    HEADER
    + "A,B,10.0,90.0,90.0,5.0,5.0\n"
    + "B,C,10.0,0.0,0.0,5.0,5.0\n"
    + "C,A,14.142135623730951,225.0,225.0,5.0,5.0\n"
)


def shot(a, b, length, azimuth, depth_from=10.0, depth_to=10.0, azimuth_out=None) -> SurveySegment:
    return SurveySegment(a, b, length, azimuth, azimuth if azimuth_out is None else azimuth_out, depth_from, depth_to)


def test_displacement_of_sloping_shot():
    d = segment_displacement(shot("A", "B", 10.0, 0.0, 0.0, 6.0))
    np.testing.assert_allclose(d, [0.0, 8.0, 6.0], atol=1e-12)


def test_displacement_averages_azimuths_across_north():
    d = segment_displacement(shot("A", "B", 10.0, 350.0, azimuth_out=10.0))
    np.testing.assert_allclose(d, [0.0, 10.0, 0.0], atol=1e-9)


def test_inconsistent_segments():
    with pytest.raises(InconsistentSegment):
        segment_displacement(shot("A", "B", 10.0, 0.0, 0.0, 12.0))
    with pytest.raises(InconsistentSegment):
        segment_displacement(shot("A", "B", 10.0, 0.0, azimuth_out=180.0))


def test_declination():
    assert apply_declination(350.0, 20.0) == pytest.approx(10.0)
    assert apply_declination(10.0, -20.0) == pytest.approx(350.0)
    net = parse_survey(HEADER + "A,B,10.0,0.0,0.0,5.0,5.0\n", declination=90.0)
    stick_map = dead_reckon(net)
    np.testing.assert_allclose(stick_map.coordinates["B"], [10.0, 0.0, 0.0], atol=1e-9)


def test_dead_reckoning_places_consistent_triangle():
    net = parse_survey(TRIANGLE)
    stick_map = dead_reckon(net)
    np.testing.assert_allclose(stick_map.coordinates["A"], [0, 0, 0])
    np.testing.assert_allclose(stick_map.coordinates["B"], [10, 0, 0], atol=1e-9)
    np.testing.assert_allclose(stick_map.coordinates["C"], [10, 10, 0], atol=1e-9)
    assert list(stick_map.misclosures) == ["C"]
    assert np.linalg.norm(stick_map.misclosures["C"]) < 1e-9
    assert stick_map.anchor_depth == 5.0


def test_dead_reckoning_is_breadth_first():
    net = SurveyNetwork((
        shot("A", "B", 10.0, 90.0),
        shot("B", "C", 10.0, 0.0),
        shot("A", "C", 15.0, 45.0),
    ))
    stick_map = dead_reckon(net, anchor="A")
    leg = 15.0 / math.sqrt(2.0)
    np.testing.assert_allclose(stick_map.coordinates["C"], [leg, leg, 0.0], atol=1e-9)
    assert list(stick_map.misclosures) == ["C"]
    np.testing.assert_allclose(stick_map.misclosures["C"], [10.0 - leg, 10.0 - leg, 0.0], atol=1e-9)


def random_network(rng, pairs):
    return SurveyNetwork(tuple(
        shot(a, b, float(rng.uniform(4.0, 12.0)), float(rng.uniform(0.0, 360.0)),
             float(rng.uniform(5.0, 8.0)), float(rng.uniform(5.0, 8.0)))
        for a, b in pairs
    ))


@pytest.mark.parametrize("solve, loops", [(dead_reckon, []), (adjust_loops, [("S5", "S1"), ("S0", "S3")])])
def test_changing_anchor_only_translates(solve, loops):
    stations = [f"S{i}" for i in range(6)]
    net = random_network(np.random.default_rng(12), [(stations[i], stations[i + 1]) for i in range(5)] + loops)
    base = solve(net, anchor="S0")
    moved = solve(net, anchor="S4")
    offset = base.coordinates["S4"]
    for station in stations:
        np.testing.assert_allclose(moved.coordinates[station], base.coordinates[station] - offset, atol=1e-9)


def test_adjustment_leaves_consistent_network_unchanged():
    net = parse_survey(TRIANGLE)
    before = dead_reckon(net)
    after = adjust_loops(net)
    for station in net.stations:
        np.testing.assert_allclose(after.coordinates[station], before.coordinates[station], atol=1e-9)
    assert max(after.residuals) < 1e-9
    assert after.method == "least-squares"


def test_adjustment_spreads_loop_misclosure():
    net = SurveyNetwork((
        shot("A", "B", 10.0, 90.0),
        shot("B", "C", 10.0, 0.0),
        shot("C", "D", 10.3, 270.0),
        shot("D", "A", 10.0, 180.0),
    ))
    raw = dead_reckon(net)
    adjusted = adjust_loops(net)
    assert list(raw.misclosures) == ["D"]
    assert np.linalg.norm(raw.misclosures["D"]) == pytest.approx(0.3)
    assert weighted_misfit(net, adjusted) < weighted_misfit(net, raw)
    assert max(adjusted.residuals) < 0.3
    np.testing.assert_array_equal(adjusted.coordinates["A"], [0, 0, 0])


def test_adjustment_matches_weighted_least_squares():
    rng = np.random.default_rng(31)
    stations = [f"S{i}" for i in range(8)]
    pairs = [(stations[i], stations[i + 1]) for i in range(7)] + [("S7", "S0"), ("S2", "S5"), ("S1", "S6")]
    segments = tuple(
        shot(a, b, float(rng.uniform(3.0, 20.0)), float(rng.uniform(0.0, 360.0)), 10.0, 10.0)
        for a, b in pairs
    )
    net = SurveyNetwork(segments)
    adjusted = adjust_loops(net, anchor="S0")

    unknowns = stations[1:]
    column = {s: i for i, s in enumerate(unknowns)}
    design = np.zeros((len(segments), len(unknowns)))
    target = np.zeros((len(segments), 2))
    for row, seg in enumerate(segments):
        w = math.sqrt(1.0 / seg.length)
        if seg.to_station in column:
            design[row, column[seg.to_station]] += w
        if seg.from_station in column:
            design[row, column[seg.from_station]] -= w
        target[row] = w * segment_displacement(seg)[:2]
    expected, *_ = np.linalg.lstsq(design, target, rcond=None)

    for station, xy in zip(unknowns, expected):
        np.testing.assert_allclose(adjusted.coordinates[station][:2], xy, atol=1e-8)


def test_depths_are_pinned_to_recorded_values():
    net = SurveyNetwork((
        shot("A", "B", 10.0, 90.0, 5.0, 8.0),
        shot("B", "C", 10.0, 0.0, 8.2, 11.0),
    ))
    adjusted = adjust_loops(net)
    assert adjusted.coordinates["B"][2] == pytest.approx(8.1 - 5.0)
    assert adjusted.depth_of("C") == pytest.approx(11.0)


def test_closure_pairs_share_coordinates():
    text = (
        HEADER
        + "A,B,10.0,90.0,90.0,5.0,5.0\n"
        + "B,C,10.0,0.0,0.0,5.0,5.0\n"
        + "C,A2,14.0,225.0,225.0,5.0,5.0\n"
    )
    net = parse_survey(text, "station_a,station_b\nA,A2\n")
    for stick_map in (dead_reckon(net), adjust_loops(net)):
        np.testing.assert_array_equal(stick_map.coordinates["A"], stick_map.coordinates["A2"])


def test_disconnected_stations():
    net = SurveyNetwork((shot("A", "B", 5.0, 0.0), shot("C", "D", 5.0, 90.0)))
    for solve in (dead_reckon, adjust_loops):
        with pytest.raises(DisconnectedStation) as info:
            solve(net)
        assert info.value.stations == ["C", "D"]


def test_unknown_anchor():
    with pytest.raises(InvalidParameter):
        dead_reckon(parse_survey(TRIANGLE), anchor="Z")


def test_single_shot_network():
    adjusted = adjust_loops(SurveyNetwork((shot("A", "B", 4.0, 0.0),)), anchor="B")
    np.testing.assert_allclose(adjusted.coordinates["A"], [0.0, -4.0, 0.0], atol=1e-12)


@pytest.mark.parametrize(
    "row, error",
    [
        ("A,B,10.0,400.0,90.0,5.0,5.0\n", RangeError),
        ("A,B,0.0,90.0,90.0,5.0,5.0\n", RangeError),
        ("A,B,10.0,90.0,90.0,-1.0,5.0\n", RangeError),
        ("A,A,10.0,90.0,90.0,5.0,5.0\n", ParseError),
        ("A,B,ten,90.0,90.0,5.0,5.0\n", ParseError),
    ],
)
def test_bad_shot_rows_report_line(row, error):
    with pytest.raises(error) as info:
        parse_survey(HEADER + row, source="shots.csv")
    assert info.value.line == 2
    assert str(info.value).startswith("shots.csv:2:")


def test_bad_closure_file():
    with pytest.raises(ParseError) as info:
        parse_survey(TRIANGLE, "station_a,station_b\nA,B\nA,Q\n", closures_source="closures.csv")
    assert info.value.line == 3
    with pytest.raises(ParseError):
        parse_survey(HEADER)


def test_survey_files_round_trip(tmp_path):
    net = parse_survey(TRIANGLE, "station_a,station_b\nA,C\n", declination=3.5)
    shots, closures = tmp_path / "shots.csv", tmp_path / "closures.csv"
    write_survey(net, shots, closures)
    reloaded = load_survey(shots, closures)
    assert reloaded.segments == net.segments
    assert reloaded.closures == (("A", "C"),)


def test_station_table_and_report():
    net = parse_survey(TRIANGLE)
    stick_map = adjust_loops(net)
    lines = format_stations(stick_map).splitlines()
    assert lines[:3] == ["# anchor=A", "# method=least-squares", "station,x_m,y_m,z_m,depth_m"]
    assert lines[3].startswith("A,0.0,0.0,0.0,5.0")

    report = stick_map_report(net, stick_map)
    assert report["stations"] == 3
    assert len(report["residuals_m"]) == 3
    assert report["weighted_misfit"] < 1e-12


def test_stickmap_svg_has_named_groups():
    net = parse_survey(TRIANGLE)
    svg = stickmap_svg(dead_reckon(net), net)
    for gid in ("segment-0", "segment-2", "station-A", "station-C", "scale-bar"):
        assert f'id="{gid}"' in svg
    assert svg == stickmap_svg(dead_reckon(net), net)
