"""
Figure helpers producing reproducible SVG documents.
"""

import io
import math
from pathlib import Path

import matplotlib
from matplotlib.figure import Figure

from .tabular import write_text

# Fixed salt and no date stamp keep repeated renders byte-identical.
SVG_RC = {
    "svg.hashsalt": "spelaeo",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
}


def new_figure(width: float = 8.0, height: float = None) -> Figure:
    """
    Create a figure detached from pyplot's global state.

    Args:
        width: Width in inches
        height: Height in inches, defaults to width * golden ratio
    """
    if not height:
        height = width * (math.sqrt(5) - 1.0) / 2.0
    return Figure(figsize=(width, height), facecolor="w")


def render_svg(fig: Figure) -> str:
    buffer = io.StringIO()
    with matplotlib.rc_context(SVG_RC):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def save_svg(fig: Figure, path: Path) -> str:
    return write_text(path, render_svg(fig))
