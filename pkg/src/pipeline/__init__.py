from .steps import (
    align_files,
    fuse_depth_files,
    run_pipeline,
    select_area_files,
    skeleton_files,
    survey_adjust_files,
    survey_stickmap_files,
    synth_files,
)

__all__ = [
    "align_files",
    "fuse_depth_files",
    "run_pipeline",
    "select_area_files",
    "skeleton_files",
    "survey_adjust_files",
    "survey_stickmap_files",
    "synth_files",
]
