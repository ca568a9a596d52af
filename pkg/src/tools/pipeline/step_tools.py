import asyncio
import uuid
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from fastmcp import Context, FastMCP
from fastmcp.exceptions import ToolError

from ...pipeline import steps
from ...utils.config import (
    AlignSettings,
    AreaSettings,
    DepthSettings,
    PipelineConfig,
    SkeletonSettings,
    config as server_config,
    load_pipeline_config,
)
from ...utils.errors import ConfigError, SpelaeoError
from ...utils.logging import get_logger


logger = get_logger(__name__)


async def _run_step(ctx: Context, tool: str, params: Dict[str, Any], fn: Callable[[], Dict[str, Any]]) -> Dict[str, Any]:
    """
    Run a blocking pipeline step off the event loop with request-scoped logging.

    Raises:
        ToolError: The step failed; toolkit errors keep their message
    """
    request_id = str(uuid.uuid4())

    logger.info(
        f"Starting {tool} tool",
        extra={
            "request_id": request_id,
            "extra_fields": {"tool": tool, **params}
        }
    )
    await ctx.info(f"Running {tool}")

    try:
        result = await asyncio.to_thread(fn)

        logger.info(
            f"{tool} tool completed successfully",
            extra={
                "request_id": request_id,
                "extra_fields": {"tool": tool, "outputs": result.get("outputs")}
            }
        )
        await ctx.info(f"{tool} finished")
        return {"success": True, **result}

    except SpelaeoError as e:
        logger.error(
            f"{tool} tool failed: {str(e)}",
            extra={
                "request_id": request_id,
                "extra_fields": {
                    "tool": tool,
                    "error_type": type(e).__name__,
                    "exit_code": e.exit_code
                }
            }
        )
        await ctx.error(f"{type(e).__name__}: {str(e)}")
        raise ToolError(str(e))

    except Exception as e:
        logger.error(
            f"{tool} tool failed with unexpected error: {str(e)}",
            extra={
                "request_id": request_id,
                "extra_fields": {"tool": tool, "error_type": "UnexpectedError"}
            },
            exc_info=True
        )
        await ctx.error(f"Unexpected error: {str(e)}")
        raise ToolError(f"{tool} failed: {str(e)}")


def _load_confined_config(path: Path) -> PipelineConfig:
    """
    Load a pipeline configuration whose out_dir must stay inside the workspace.

    The middleware only sees the config path, not the directory it writes to.

    Raises:
        ConfigError: out_dir resolves outside SPELAEO_WORKSPACE
    """
    cfg = load_pipeline_config(path)
    if server_config.is_workspace_restricted():
        out_dir = Path(cfg.pipeline.out_dir).resolve()
        if not out_dir.is_relative_to(server_config.workspace):
            raise ConfigError(f"pipeline out_dir {out_dir} is outside workspace {server_config.workspace}")
    return cfg


def register_step_tools(server: FastMCP) -> None:
    """Register one tool per pipeline step."""

    @server.tool(name="fuse_depth", tags={"depth", "write"})
    async def fuse_depth(
        ctx: Context,
        trajectory: str,
        depth_log: str,
        out: str,
        report: Optional[str] = None,
        rate: float = 100.0,
        max_shift: float = 1200.0,
    ) -> Dict[str, Any]:
        """
        Synchronize a SLAM trajectory with a dive-computer depth log.

        Args:
            trajectory: Trajectory CSV (timestamp_s,tx,ty,tz,qx,qy,qz,qw)
            depth_log: Depth log CSV (timestamp_s,depth_m)
            out: Path of the corrected trajectory CSV
            report: Optional JSON report path
            rate: Resampling rate in Hz
            max_shift: Largest clock offset searched, in seconds

        Returns:
            Recovered time shift, scale, offset and residual RMS
        """
        settings = DepthSettings(rate=rate, max_shift=max_shift)
        return await _run_step(
            ctx, "fuse_depth", {"trajectory": trajectory, "depth_log": depth_log},
            lambda: steps.fuse_depth_files(
                Path(trajectory), Path(depth_log), Path(out),
                Path(report) if report else None, None, settings,
            ),
        )

    @server.tool(name="align_trajectories", tags={"alignment", "write"})
    async def align_trajectories(
        ctx: Context,
        ref: str,
        ref_obs: str,
        mov: str,
        mov_obs: str,
        out: str,
        report: Optional[str] = None,
    ) -> Dict[str, Any]:
        """
        Express a moving trajectory in the reference frame using shared target observations.

        Returns:
            Target estimates for both frames and the recovered frame transform
        """
        return await _run_step(
            ctx, "align_trajectories", {"ref": ref, "mov": mov},
            lambda: steps.align_files(
                Path(ref), Path(ref_obs), Path(mov), Path(mov_obs), Path(out),
                Path(report) if report else None, AlignSettings(),
            ),
        )

    @server.tool(name="build_skeleton", tags={"skeleton", "write"})
    async def build_skeleton(
        ctx: Context,
        trajectories: List[str],
        out_dir: str,
        cloud: Optional[str] = None,
        center_index: int = 1,
        flag_radius: float = 1.0,
        depth_tol: float = 0.2,
    ) -> Dict[str, Any]:
        """
        Build centerline nodes, MST edges and LRUD records.

        Args:
            trajectories: Aligned trajectory CSVs
            out_dir: Directory for nodes.csv, edges.csv, lrud.csv, skeleton.json
            cloud: Fused ASCII PLY point cloud
            center_index: Index of the trajectory driving the averaging
            flag_radius: Flagging radius in meters
            depth_tol: Depth band for left/right wall points in meters
        """
        settings = SkeletonSettings(center_index=center_index, flag_radius=flag_radius, depth_tol=depth_tol)
        return await _run_step(
            ctx, "build_skeleton", {"trajectories": trajectories, "cloud": cloud},
            lambda: steps.skeleton_files(
                [Path(t) for t in trajectories], Path(cloud) if cloud else None, Path(out_dir), settings,
            ),
        )

    @server.tool(name="adjust_survey", tags={"survey", "write"})
    async def adjust_survey(
        ctx: Context,
        shots: str,
        out: str,
        closures: Optional[str] = None,
        anchor: Optional[str] = None,
        declination: float = 0.0,
        svg: Optional[str] = None,
        report: Optional[str] = None,
    ) -> Dict[str, Any]:
        """
        Least-squares loop-closure adjustment of a caveline survey.

        Returns:
            Residuals, weighted misfit and dead-reckoning misclosures
        """
        return await _run_step(
            ctx, "adjust_survey", {"shots": shots, "closures": closures, "anchor": anchor},
            lambda: steps.survey_adjust_files(
                Path(shots), Path(out), Path(closures) if closures else None, anchor, declination,
                Path(svg) if svg else None, Path(report) if report else None,
            ),
        )

    @server.tool(name="render_stickmap", tags={"survey", "write"})
    async def render_stickmap(
        ctx: Context,
        shots: str,
        svg: str,
        closures: Optional[str] = None,
        anchor: Optional[str] = None,
        declination: float = 0.0,
        adjusted: bool = True,
    ) -> Dict[str, Any]:
        """Render a plan-view stick map SVG of a survey."""
        return await _run_step(
            ctx, "render_stickmap", {"shots": shots, "adjusted": adjusted},
            lambda: steps.survey_stickmap_files(
                Path(shots), Path(svg), Path(closures) if closures else None, anchor, declination, adjusted,
            ),
        )

    @server.tool(name="select_area", tags={"recon", "write"})
    async def select_area(
        ctx: Context,
        trajectories: List[str],
        center_trajectory: str,
        center_time: float,
        out: str,
        radius: float = 2.5,
    ) -> Dict[str, Any]:
        """
        Select keyframes within a radius of a central keyframe and export a pose-prior manifest.

        Args:
            trajectories: Trajectory CSVs to select from
            center_trajectory: Trajectory holding the central keyframe
            center_time: Timestamp of the central keyframe in seconds
            out: Manifest CSV path
            radius: Selection radius in meters
        """
        return await _run_step(
            ctx, "select_area", {"center_time": center_time, "radius": radius},
            lambda: steps.select_area_files(
                [Path(t) for t in trajectories], Path(center_trajectory), center_time, Path(out), radius, AreaSettings(),
            ),
        )

    @server.tool(name="generate_synthetic", tags={"synth", "write"})
    async def generate_synthetic(
        ctx: Context,
        out_dir: str,
        spec: Optional[str] = None,
        seed: Optional[int] = None,
    ) -> Dict[str, Any]:
        """
        Generate a synthetic corridor bundle with ground truth.

        Args:
            out_dir: Output directory
            spec: Optional corridor spec TOML file
            seed: Overrides the corridor file's seed
        """
        return await _run_step(
            ctx, "generate_synthetic", {"spec": spec, "seed": seed},
            lambda: steps.synth_files(Path(spec) if spec else None, Path(out_dir), seed),
        )

    @server.tool(name="run_pipeline", tags={"pipeline", "write"})
    async def run_pipeline(ctx: Context, config: str) -> Dict[str, Any]:
        """
        Run fuse-depth, align, skeleton, select-area and survey from a pipeline TOML file.

        Args:
            config: Pipeline configuration file
        """
        return await _run_step(
            ctx, "run_pipeline", {"config": config},
            lambda: steps.run_pipeline(_load_confined_config(Path(config))),
        )
