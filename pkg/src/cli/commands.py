import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from .. import __version__
from ..pipeline import steps
from ..utils.config import PipelineConfig, load_pipeline_config
from ..utils.errors import SpelaeoError, UsageError
from ..utils.logging import get_logger, set_verbosity


logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = UsageError.exit_code
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _overrides(settings: Any, **values: Any) -> Any:
    """Return ``settings`` with every non-None flag value applied."""
    given = {key: value for key, value in values.items() if value is not None}
    return replace(settings, **given) if given else settings


def _cmd_fuse_depth(args: argparse.Namespace, cfg: PipelineConfig) -> Dict[str, Any]:
    settings = _overrides(cfg.depth, rate=args.rate, max_shift=args.max_shift, min_overlap=args.min_overlap)
    return steps.fuse_depth_files(args.trajectory, args.depth_log, args.out, args.report, args.plot, settings)


def _cmd_align(args: argparse.Namespace, cfg: PipelineConfig) -> Dict[str, Any]:
    settings = _overrides(cfg.align, association_tolerance=args.tolerance)
    return steps.align_files(args.ref, args.ref_obs, args.mov, args.mov_obs, args.out, args.report, settings)


def _cmd_skeleton(args: argparse.Namespace, cfg: PipelineConfig) -> Dict[str, Any]:
    settings = _overrides(
        cfg.skeleton,
        center_index=args.center_index,
        flag_radius=args.flag_radius,
        depth_tol=args.depth_tol,
        lateral_radius=args.lateral_radius,
    )
    return steps.skeleton_files(args.traj, args.cloud, args.out_dir, settings, args.plot)


def _cmd_select_area(args: argparse.Namespace, cfg: PipelineConfig) -> Dict[str, Any]:
    settings = _overrides(cfg.area, image_pattern=args.pattern, time_tolerance=args.time_tolerance)
    return steps.select_area_files(args.traj, args.center_traj, args.center_time, args.out, args.radius, settings)


def _survey_settings(args: argparse.Namespace, cfg: PipelineConfig):
    return _overrides(cfg.survey, declination=args.declination, anchor=args.anchor)


def _cmd_survey_adjust(args: argparse.Namespace, cfg: PipelineConfig) -> Dict[str, Any]:
    survey = _survey_settings(args, cfg)
    return steps.survey_adjust_files(
        args.shots, args.out, args.closures, survey.anchor, survey.declination, args.svg, args.report,
    )


def _cmd_survey_stickmap(args: argparse.Namespace, cfg: PipelineConfig) -> Dict[str, Any]:
    survey = _survey_settings(args, cfg)
    return steps.survey_stickmap_files(
        args.shots, args.svg, args.closures, survey.anchor, survey.declination, not args.raw,
    )


def _cmd_synth(args: argparse.Namespace, cfg: PipelineConfig) -> Dict[str, Any]:
    seed = args.seed
    if seed is None and args.config is not None:
        seed = cfg.synth.seed
    return steps.synth_files(args.spec, args.out_dir, seed)


def _cmd_pipeline(args: argparse.Namespace, cfg: PipelineConfig) -> Dict[str, Any]:
    if args.config is None:
        raise UsageError("pipeline requires --config")
    pipeline = _overrides(cfg.pipeline, out_dir=args.out_dir, workers=args.workers)
    return steps.run_pipeline(replace(cfg, pipeline=pipeline))


def _cmd_serve(args: argparse.Namespace, cfg: PipelineConfig) -> Dict[str, Any]:
    from ..server import serve

    serve(args.transport, args.port)
    return {}


def build_parser() -> argparse.ArgumentParser:
    """Build the ``spelaeo`` argument parser with one subcommand per pipeline step."""
    parser = _Parser(prog="spelaeo", description="Underwater cave mapping toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", type=Path, help="pipeline TOML file; flags override its values")
    parser.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("fuse-depth", help="synchronize a trajectory with a depth log")
    p.add_argument("--trajectory", type=Path, required=True)
    p.add_argument("--depth-log", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--report", type=Path)
    p.add_argument("--plot", type=Path, help="diagnostic SVG")
    p.add_argument("--rate", type=float)
    p.add_argument("--max-shift", type=float)
    p.add_argument("--min-overlap", type=float)
    p.set_defaults(handler=_cmd_fuse_depth)

    p = sub.add_parser("align", help="align a trajectory to a reference via the shared target")
    p.add_argument("--ref", type=Path, required=True)
    p.add_argument("--ref-obs", type=Path, required=True)
    p.add_argument("--mov", type=Path, required=True)
    p.add_argument("--mov-obs", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--report", type=Path)
    p.add_argument("--tolerance", type=float, help="observation association tolerance in seconds")
    p.set_defaults(handler=_cmd_align)

    p = sub.add_parser("skeleton", help="build centerline, MST and LRUD")
    p.add_argument("--traj", type=Path, action="append", required=True)
    p.add_argument("--cloud", type=Path)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--plot", type=Path)
    p.add_argument("--center-index", type=int)
    p.add_argument("--flag-radius", type=float)
    p.add_argument("--depth-tol", type=float)
    p.add_argument("--lateral-radius", type=float)
    p.set_defaults(handler=_cmd_skeleton)

    p = sub.add_parser("select-area", help="export a pose-prior manifest for one area")
    p.add_argument("--traj", type=Path, action="append", required=True)
    p.add_argument("--center-traj", type=Path, required=True)
    p.add_argument("--center-time", type=float, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--radius", type=float)
    p.add_argument("--pattern", help="image name pattern, e.g. {camera_id}/{timestamp:.6f}.png")
    p.add_argument("--time-tolerance", type=float)
    p.set_defaults(handler=_cmd_select_area)

    survey = sub.add_parser("survey", help="caveline survey processing")
    survey_sub = survey.add_subparsers(dest="survey_command", required=True, metavar="ACTION")
    for name, handler, help_text in (
        ("adjust", _cmd_survey_adjust, "least-squares loop adjustment"),
        ("stickmap", _cmd_survey_stickmap, "render a plan-view stick map"),
    ):
        p = survey_sub.add_parser(name, help=help_text)
        p.add_argument("--shots", type=Path, required=True)
        p.add_argument("--closures", type=Path)
        p.add_argument("--anchor")
        p.add_argument("--declination", type=float)
        if name == "adjust":
            p.add_argument("--out", type=Path, required=True)
            p.add_argument("--svg", type=Path)
            p.add_argument("--report", type=Path)
        else:
            p.add_argument("--svg", type=Path, required=True)
            p.add_argument("--raw", action="store_true", help="draw dead reckoning instead of the adjustment")
        p.set_defaults(handler=handler)

    p = sub.add_parser("synth", help="generate a synthetic corridor bundle")
    p.add_argument("--spec", type=Path)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("pipeline", help="run every step from a config file")
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--workers", type=int)
    p.set_defaults(handler=_cmd_pipeline)

    p = sub.add_parser("serve", help="start the MCP tool server")
    p.add_argument("--transport", choices=("stdio", "http"))
    p.add_argument("--port", type=int)
    p.set_defaults(handler=_cmd_serve)

    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse ``argv`` and run one subcommand.

    Returns:
        0 on success, 1 on usage errors, 2 on data errors, 3 on numerical failures
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    if args.quiet:
        set_verbosity(logging.WARNING)

    try:
        cfg = load_pipeline_config(args.config)
        result = args.handler(args, cfg)
    except SpelaeoError as e:
        logger.error(
            str(e),
            extra={
                "extra_fields": {
                    "command": args.command,
                    "error_type": type(e).__name__,
                    "exit_code": e.exit_code
                }
            }
        )
        return e.exit_code
    except OSError as e:
        logger.error(
            f"I/O error: {e}",
            extra={"extra_fields": {"command": args.command, "error_type": type(e).__name__}}
        )
        return EXIT_DATA
    except Exception as e:
        logger.error(
            f"Unexpected error: {e}",
            extra={"extra_fields": {"command": args.command, "error_type": "UnexpectedError"}},
            exc_info=True
        )
        return EXIT_DATA

    outputs: List[str] = sorted(str(v) for v in (result.get("outputs") or {}).values()) if isinstance(result, dict) else []
    logger.info(
        f"Command {args.command} finished",
        extra={"extra_fields": {"command": args.command, "outputs": outputs}}
    )
    return EXIT_OK


def main() -> None:
    sys.exit(run())
