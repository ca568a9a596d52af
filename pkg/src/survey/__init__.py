from .adjust import (
    StickMap,
    adjust_loops,
    dead_reckon,
    format_stations,
    segment_displacement,
    stick_map_report,
    weighted_misfit,
)
from .network import SurveyNetwork, SurveySegment, load_survey, parse_survey, write_survey
from .stickmap import plot_stickmap, stickmap_svg, write_stickmap

__all__ = [
    "StickMap",
    "SurveyNetwork",
    "SurveySegment",
    "adjust_loops",
    "dead_reckon",
    "format_stations",
    "load_survey",
    "parse_survey",
    "plot_stickmap",
    "segment_displacement",
    "stick_map_report",
    "stickmap_svg",
    "weighted_misfit",
    "write_stickmap",
    "write_survey",
]
