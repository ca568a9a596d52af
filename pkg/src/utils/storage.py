"""JSON persistence: usage statistics under the database directory and run reports."""

import json
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict

from .config import config


def _dump_json(path: Path, data: Dict[str, Any], sort_keys: bool) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    staging = path.with_name(path.name + ".tmp")
    with open(staging, "w", encoding="utf-8", newline="\n") as f:
        json.dump(data, f, indent=2, sort_keys=sort_keys)
        f.write("\n")
    os.replace(staging, path)
    return str(path)


def get_database_path(schema: str) -> Path:
    """Map a schema name such as "middleware/usage/fuse_depth" to its JSON file."""
    return (config.db_dir / schema).with_suffix(".json")


def save_to_database(schema: str, data: Dict[str, Any]) -> str:
    """
    Store a record under a schema, stamped with the save time.

    The file is replaced atomically so a concurrent reader never sees a
    half-written record.

    Args:
        schema: Schema name (e.g., "middleware/usage/fuse_depth")
        data: Record to store

    Returns:
        Path to the saved file
    """
    envelope = {"timestamp": datetime.now(timezone.utc).isoformat(), "data": data}
    return _dump_json(get_database_path(schema), envelope, sort_keys=False)


def load_from_database(schema: str) -> Dict[str, Any]:
    """Return the stored envelope for a schema, or {} when nothing was saved yet."""
    path = get_database_path(schema)
    if not path.is_file():
        return {}
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def write_json_report(path: Path, data: Dict[str, Any]) -> str:
    """
    Write a machine-readable report.

    Reports carry no wall-clock timestamp so identical runs produce
    byte-identical files.

    Args:
        path: Output file
        data: JSON-serializable mapping

    Returns:
        Path to the written file
    """
    return _dump_json(Path(path), data, sort_keys=True)
