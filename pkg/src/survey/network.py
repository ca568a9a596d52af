"""
Caveline survey shots and loop-closure declarations.

Shot file header: ``from,to,length_m,azimuth_in_deg,azimuth_out_deg,depth_from_m,depth_to_m``.
Closure file header: ``station_a,station_b``.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from ..utils.errors import ParseError, RangeError
from ..utils.logging import get_logger
from ..utils.tabular import format_float, parse_float, read_table, read_text, render_csv, write_text

logger = get_logger(__name__)

SHOTS_HEADER = ("from", "to", "length_m", "azimuth_in_deg", "azimuth_out_deg", "depth_from_m", "depth_to_m")
CLOSURES_HEADER = ("station_a", "station_b")


@dataclass(frozen=True)
class SurveySegment:
    """One caveline shot; azimuths in degrees clockwise from true north, depths positive down."""

    from_station: str
    to_station: str
    length: float
    azimuth_in: float
    azimuth_out: float
    depth_from: float
    depth_to: float


@dataclass(frozen=True)
class SurveyNetwork:
    segments: Tuple[SurveySegment, ...]
    closures: Tuple[Tuple[str, str], ...] = ()
    declination: float = 0.0

    @property
    def stations(self) -> Tuple[str, ...]:
        """Station labels in order of first appearance."""
        seen: Dict[str, None] = {}
        for seg in self.segments:
            seen.setdefault(seg.from_station, None)
            seen.setdefault(seg.to_station, None)
        return tuple(seen)


def apply_declination(azimuth: float, declination: float) -> float:
    rotated = (azimuth + declination) % 360.0
    # float modulo can round up to exactly 360
    return 0.0 if rotated >= 360.0 else rotated


def parse_shots(text: str, declination: float = 0.0, source: str = "<shots>") -> List[SurveySegment]:
    """
    Parse survey shots, rotating magnetic azimuths by ``declination`` degrees.

    Raises:
        ParseError: Malformed rows or no segments
        RangeError: Azimuth outside [0, 360), length <= 0, negative depth
    """
    rows, _ = read_table(text, SHOTS_HEADER, source)
    segments = []
    for line, row in rows:
        if not row["from"] or not row["to"]:
            raise ParseError("station label is empty", source, line)
        if row["from"] == row["to"]:
            raise ParseError(f"segment starts and ends at '{row['from']}'", source, line)
        length = parse_float(row["length_m"], "length_m", line, source)
        if not length > 0:
            raise RangeError(f"column 'length_m': {length!r} must be > 0", source, line)
        azimuths = []
        for column in ("azimuth_in_deg", "azimuth_out_deg"):
            value = parse_float(row[column], column, line, source)
            if not 0.0 <= value < 360.0:
                raise RangeError(f"column '{column}': azimuth {value!r} outside [0, 360)", source, line)
            azimuths.append(apply_declination(value, declination))
        depths = []
        for column in ("depth_from_m", "depth_to_m"):
            value = parse_float(row[column], column, line, source)
            if value < 0.0:
                raise RangeError(f"column '{column}': depth {value!r} must be >= 0", source, line)
            depths.append(value)
        segments.append(SurveySegment(row["from"], row["to"], length, *azimuths, *depths))
    if not segments:
        raise ParseError("no segments", source, None)
    return segments


def parse_closures(text: str, stations: Sequence[str], source: str = "<closures>") -> List[Tuple[str, str]]:
    """
    Parse closure pairs; both stations must appear in the shots.

    Raises:
        ParseError: Malformed rows or unknown stations
    """
    known = set(stations)
    rows, _ = read_table(text, CLOSURES_HEADER, source)
    closures = []
    for line, row in rows:
        pair = (row["station_a"], row["station_b"])
        for station in pair:
            if station not in known:
                raise ParseError(f"closure references unknown station '{station}'", source, line)
        closures.append(pair)
    return closures


def parse_survey(
    text: str,
    closures_text: Optional[str] = None,
    declination: float = 0.0,
    source: str = "<shots>",
    closures_source: str = "<closures>",
) -> SurveyNetwork:
    segments = parse_shots(text, declination, source)
    network = SurveyNetwork(tuple(segments), (), declination)
    if closures_text is not None:
        closures = parse_closures(closures_text, network.stations, closures_source)
        network = SurveyNetwork(network.segments, tuple(closures), declination)
    logger.info(
        f"Survey parsed: {source}",
        extra={"extra_fields": {
            "segments": len(network.segments),
            "stations": len(network.stations),
            "closures": len(network.closures),
            "declination_deg": declination,
        }}
    )
    return network


def load_survey(shots: Path, closures: Optional[Path] = None, declination: float = 0.0) -> SurveyNetwork:
    return parse_survey(
        read_text(shots),
        None if closures is None else read_text(closures),
        declination,
        source=str(shots),
        closures_source=str(closures),
    )


def format_shots(segments: Sequence[SurveySegment]) -> str:
    rows = (
        [
            s.from_station,
            s.to_station,
            format_float(s.length),
            format_float(s.azimuth_in),
            format_float(s.azimuth_out),
            format_float(s.depth_from),
            format_float(s.depth_to),
        ]
        for s in segments
    )
    return render_csv(SHOTS_HEADER, rows)


def format_closures(closures: Sequence[Tuple[str, str]]) -> str:
    return render_csv(CLOSURES_HEADER, ([a, b] for a, b in closures))


def write_survey(network: SurveyNetwork, shots: Path, closures: Optional[Path] = None) -> List[str]:
    written = [write_text(shots, format_shots(network.segments))]
    if closures is not None:
        written.append(write_text(closures, format_closures(network.closures)))
    return written
