"""
Stick-map computation from survey shots.

Coordinates: x east, y north, z down, anchor station at the origin.
Stations named in a closure pair are merged into one point before either
dead reckoning or adjustment.
"""

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np
from networkx.utils import UnionFind
from scipy import linalg

from .network import SurveyNetwork, SurveySegment
from ..geometry.pose import circular_mean
from ..utils.errors import (
    DegenerateMean,
    DisconnectedStation,
    InconsistentSegment,
    InvalidParameter,
    SingularSystem,
)
from ..utils.logging import get_logger
from ..utils.tabular import format_float, render_csv

logger = get_logger(__name__)

STATIONS_HEADER = ("station", "x_m", "y_m", "z_m", "depth_m")
_VERTICAL_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class StickMap:
    """Station coordinates plus per-segment residual norms (meters).

    ``anchor_depth`` is the anchor's absolute recorded depth, so a station's
    depth is ``anchor_depth + z``. ``misclosures`` maps a station to the gap
    found when a traverse reached it a second time.
    """

    coordinates: Dict[str, np.ndarray]
    anchor: str
    anchor_depth: float
    residuals: Tuple[float, ...]
    misclosures: Dict[str, np.ndarray] = field(default_factory=dict)
    method: str = "dead-reckoning"

    def depth_of(self, station: str) -> float:
        return self.anchor_depth + float(self.coordinates[station][2])


def segment_displacement(seg: SurveySegment) -> np.ndarray:
    """
    Displacement (east, north, down) of one shot.

    The heading is the circular mean of the two endpoint azimuths.

    Raises:
        InconsistentSegment: Depth change exceeds the shot length, or the two azimuths are opposite
    """
    dz = seg.depth_to - seg.depth_from
    if abs(dz) > seg.length * (1.0 + _VERTICAL_TOLERANCE):
        raise InconsistentSegment(
            f"{seg.from_station}->{seg.to_station}: depth change {dz!r} exceeds length {seg.length!r}"
        )
    horizontal = math.sqrt(max(0.0, seg.length ** 2 - dz ** 2))
    if seg.azimuth_in == seg.azimuth_out:
        azimuth = math.radians(seg.azimuth_in)
    else:
        try:
            azimuth = circular_mean([math.radians(seg.azimuth_in), math.radians(seg.azimuth_out)])
        except DegenerateMean:
            raise InconsistentSegment(
                f"{seg.from_station}->{seg.to_station}: azimuths {seg.azimuth_in} and {seg.azimuth_out} are opposite"
            ) from None
    return np.array([horizontal * math.sin(azimuth), horizontal * math.cos(azimuth), dz])


def _representatives(net: SurveyNetwork) -> Dict[str, str]:
    """Map every station to the first-appearing member of its closure group."""
    order = {station: i for i, station in enumerate(net.stations)}
    groups = UnionFind(net.stations)
    for a, b in net.closures:
        groups.union(a, b)
    rep = {}
    for members in groups.to_sets():
        head = min(members, key=order.__getitem__)
        for station in members:
            rep[station] = head
    return rep


def _resolve_anchor(net: SurveyNetwork, anchor: Optional[str]) -> str:
    if anchor is None:
        return net.stations[0]
    if anchor not in net.stations:
        raise InvalidParameter(f"anchor station '{anchor}' not in survey")
    return anchor


def _segment_residuals(net: SurveyNetwork, coordinates: Dict[str, np.ndarray], displacements: List[np.ndarray]) -> List[np.ndarray]:
    return [
        coordinates[seg.to_station] - coordinates[seg.from_station] - d
        for seg, d in zip(net.segments, displacements)
    ]


def dead_reckon(net: SurveyNetwork, anchor: Optional[str] = None) -> StickMap:
    """
    Chain shot displacements breadth-first from the anchor.

    Each station's shots are followed in segment-list order and the first
    visit fixes a station's coordinate. A shot met when both of its ends are
    already placed records a misclosure on its ``to`` station:
    (from + displacement) - to.

    Raises:
        DisconnectedStation: Some stations cannot be reached from the anchor
        InconsistentSegment: From segment_displacement
    """
    anchor = _resolve_anchor(net, anchor)
    rep = _representatives(net)
    displacements = [segment_displacement(seg) for seg in net.segments]

    shots_at: Dict[str, List[Tuple[int, str, np.ndarray]]] = {}
    for i, (seg, d) in enumerate(zip(net.segments, displacements)):
        a, b = rep[seg.from_station], rep[seg.to_station]
        shots_at.setdefault(a, []).append((i, b, d))
        shots_at.setdefault(b, []).append((i, a, -d))

    placed: Dict[str, np.ndarray] = {rep[anchor]: np.zeros(3)}
    followed = set()
    misclosures: Dict[str, np.ndarray] = {}
    queue = deque([rep[anchor]])
    while queue:
        station = queue.popleft()
        for i, other, d in shots_at.get(station, ()):
            if i in followed:
                continue
            followed.add(i)
            if other not in placed:
                placed[other] = placed[station] + d
                queue.append(other)
                continue
            seg = net.segments[i]
            gap = placed[rep[seg.from_station]] + displacements[i] - placed[rep[seg.to_station]]
            misclosures.setdefault(seg.to_station, gap)

    missing = [s for s in net.stations if rep[s] not in placed]
    if missing:
        raise DisconnectedStation(missing)

    coordinates = {s: placed[rep[s]].copy() for s in net.stations}
    residuals = tuple(float(np.linalg.norm(r)) for r in _segment_residuals(net, coordinates, displacements))
    anchor_depth = _mean_depths(net, rep)[rep[anchor]]
    logger.info(
        "Survey dead-reckoned",
        extra={"extra_fields": {
            "stations": len(coordinates),
            "anchor": anchor,
            "misclosures": {s: float(np.linalg.norm(v)) for s, v in misclosures.items()},
        }}
    )
    return StickMap(coordinates, anchor, anchor_depth, residuals, misclosures, "dead-reckoning")


def _mean_depths(net: SurveyNetwork, rep: Dict[str, str]) -> Dict[str, float]:
    samples: Dict[str, List[float]] = {}
    for seg in net.segments:
        samples.setdefault(rep[seg.from_station], []).append(seg.depth_from)
        samples.setdefault(rep[seg.to_station], []).append(seg.depth_to)
    return {station: float(np.mean(values)) for station, values in samples.items()}


def adjust_loops(net: SurveyNetwork, anchor: Optional[str] = None) -> StickMap:
    """
    Weighted least-squares adjustment of horizontal station positions.

    Depths are pinned: each station's z is its mean recorded depth relative
    to the anchor's. The horizontal residual of each shot,
    (to - from) - displacement, is weighted by 1/length, and closure pairs
    are a single unknown. The normal equations are solved densely.

    Raises:
        DisconnectedStation: Some stations cannot be reached from the anchor
        SingularSystem: The normal equations are not solvable
        InconsistentSegment: From segment_displacement
    """
    anchor = _resolve_anchor(net, anchor)
    rep = _representatives(net)
    displacements = [segment_displacement(seg) for seg in net.segments]

    graph = nx.Graph()
    graph.add_nodes_from(rep.values())
    graph.add_edges_from((rep[s.from_station], rep[s.to_station]) for s in net.segments)
    reachable = nx.node_connected_component(graph, rep[anchor])
    missing = [s for s in net.stations if rep[s] not in reachable]
    if missing:
        raise DisconnectedStation(missing)

    depths = _mean_depths(net, rep)
    anchor_depth = depths[rep[anchor]]
    unknowns = [s for s in dict.fromkeys(rep[s] for s in net.stations) if s != rep[anchor]]
    index = {station: i for i, station in enumerate(unknowns)}

    normal = np.zeros((len(unknowns), len(unknowns)))
    rhs = np.zeros((len(unknowns), 2))
    for seg, d in zip(net.segments, displacements):
        weight = 1.0 / seg.length
        terms = [(index.get(rep[seg.to_station]), 1.0), (index.get(rep[seg.from_station]), -1.0)]
        terms = [(i, sign) for i, sign in terms if i is not None]
        for i, si in terms:
            rhs[i] += weight * si * d[:2]
            for j, sj in terms:
                normal[i, j] += weight * si * sj

    horizontal = np.zeros((0, 2))
    if unknowns:
        try:
            horizontal = linalg.solve(normal, rhs, assume_a="pos")
        except (linalg.LinAlgError, ValueError) as e:
            raise SingularSystem(f"survey normal equations are singular: {e}") from None
        if not np.all(np.isfinite(horizontal)):
            raise SingularSystem("survey adjustment produced non-finite coordinates")

    placed = {rep[anchor]: np.zeros(3)}
    for station, xy in zip(unknowns, horizontal):
        placed[station] = np.array([xy[0], xy[1], depths[station] - anchor_depth])

    coordinates = {s: placed[rep[s]].copy() for s in net.stations}
    residuals = tuple(float(np.linalg.norm(r)) for r in _segment_residuals(net, coordinates, displacements))
    stick_map = StickMap(coordinates, anchor, anchor_depth, residuals, {}, "least-squares")
    logger.info(
        "Survey adjusted",
        extra={"extra_fields": {
            "stations": len(coordinates),
            "unknowns": len(unknowns),
            "closures": len(net.closures),
            "weighted_misfit": weighted_misfit(net, stick_map),
        }}
    )
    return stick_map


def weighted_misfit(net: SurveyNetwork, stick_map: StickMap) -> float:
    """Sum over shots of |horizontal residual|^2 / length, the adjustment's objective."""
    displacements = [segment_displacement(seg) for seg in net.segments]
    residuals = _segment_residuals(net, stick_map.coordinates, displacements)
    return float(sum(float(r[:2] @ r[:2]) / seg.length for seg, r in zip(net.segments, residuals)))


def format_stations(stick_map: StickMap) -> str:
    rows = (
        [station, *(format_float(v) for v in xyz), format_float(stick_map.depth_of(station))]
        for station, xyz in stick_map.coordinates.items()
    )
    return render_csv(STATIONS_HEADER, rows, [f"anchor={stick_map.anchor}", f"method={stick_map.method}"])


def stick_map_report(net: SurveyNetwork, stick_map: StickMap) -> Dict[str, object]:
    return {
        "method": stick_map.method,
        "anchor": stick_map.anchor,
        "anchor_depth_m": stick_map.anchor_depth,
        "declination_deg": net.declination,
        "stations": len(stick_map.coordinates),
        "segments": len(net.segments),
        "closures": [list(pair) for pair in net.closures],
        "residuals_m": list(stick_map.residuals),
        "weighted_misfit": weighted_misfit(net, stick_map),
        "misclosures_m": {s: [float(v) for v in gap] for s, gap in stick_map.misclosures.items()},
    }
