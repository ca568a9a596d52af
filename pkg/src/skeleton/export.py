from pathlib import Path
from typing import Dict, List

from .lrud import SIDES, CaveSkeleton, passage_profile
from ..utils.storage import write_json_report
from ..utils.tabular import format_float, render_csv, write_text

NODES_HEADER = ("id", "tx", "ty", "tz", "qx", "qy", "qz", "qw", "source_count")
EDGES_HEADER = ("a", "b", "length_m")
LRUD_HEADER = ("id",) + tuple(f"{side}_{axis}" for side in SIDES for axis in ("x", "y", "z", "d"))


def format_nodes(skel: CaveSkeleton) -> str:
    rows = (
        [str(n.id), *(format_float(v) for v in n.pose.as_row()), str(n.source_count)]
        for n in skel.nodes
    )
    return render_csv(NODES_HEADER, rows)


def format_edges(skel: CaveSkeleton) -> str:
    rows = ([str(e.a), str(e.b), format_float(e.length)] for e in skel.edges)
    return render_csv(EDGES_HEADER, rows)


def format_lrud(skel: CaveSkeleton) -> str:
    rows = []
    for record in skel.lrud:
        row = [str(record.node_id)]
        for side in SIDES:
            boundary = record.side(side)
            if boundary is None:
                row += [""] * 4
            else:
                row += [format_float(v) for v in boundary.point] + [format_float(boundary.distance)]
        rows.append(row)
    return render_csv(LRUD_HEADER, rows)


def skeleton_report(skel: CaveSkeleton) -> Dict[str, object]:
    """Provenance, passage profile and per-node diagnostics for skeleton.json."""
    diagnostics: List[Dict[str, object]] = [
        {
            "id": r.node_id,
            "heading": [float(v) for v in r.heading],
            "heading_source": r.heading_source,
            "lr_candidates": r.lr_candidates,
            "ud_candidates": r.ud_candidates,
            "distances_m": {
                side: (None if r.side(side) is None else r.side(side).distance) for side in SIDES
            },
        }
        for r in skel.lrud
    ]
    return {
        "node_count": len(skel.nodes),
        "edge_count": len(skel.edges),
        "total_length_m": sum(e.length for e in skel.edges),
        "provenance": skel.provenance,
        "profile": passage_profile(skel),
        "diagnostics": diagnostics,
    }


def write_skeleton(skel: CaveSkeleton, out_dir: Path) -> Dict[str, str]:
    """
    Write nodes.csv, edges.csv, lrud.csv and skeleton.json into ``out_dir``.

    Returns:
        Mapping of output name to written path
    """
    out_dir = Path(out_dir)
    return {
        "nodes": write_text(out_dir / "nodes.csv", format_nodes(skel)),
        "edges": write_text(out_dir / "edges.csv", format_edges(skel)),
        "lrud": write_text(out_dir / "lrud.csv", format_lrud(skel)),
        "report": write_json_report(out_dir / "skeleton.json", skeleton_report(skel)),
    }


