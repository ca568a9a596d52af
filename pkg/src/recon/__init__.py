from .area import (
    AreaMember,
    AreaSelection,
    area_report,
    export_manifest,
    load_manifest,
    parse_manifest,
    select_keyframes,
    write_manifest,
)

__all__ = [
    "AreaMember",
    "AreaSelection",
    "area_report",
    "export_manifest",
    "load_manifest",
    "parse_manifest",
    "select_keyframes",
    "write_manifest",
]
