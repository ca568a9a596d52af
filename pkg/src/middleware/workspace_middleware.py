import uuid
from pathlib import Path
from typing import Any, Iterable, List, Mapping

from fastmcp.server.middleware import Middleware, MiddlewareContext
from fastmcp.exceptions import ToolError
from fastmcp.tools.tool import ToolResult
from mcp import types as mt

from ..utils.config import config
from ..utils.logging import get_logger


logger = get_logger(__name__)

OUTPUT_ARGUMENTS = ("out", "out_dir", "report", "svg", "plot")


def _outside(paths: Iterable[str], root: Path) -> List[str]:
    rejected = []
    for raw in paths:
        resolved = Path(raw).resolve()
        if not resolved.is_relative_to(root):
            rejected.append(raw)
    return rejected


class WorkspaceMiddleware(Middleware):
    """Middleware confining tool outputs to the configured workspace directory."""

    async def on_call_tool(
        self,
        context: MiddlewareContext[mt.CallToolRequestParams],
        call_next,
    ) -> ToolResult:
        """
        Reject tool calls whose output paths resolve outside SPELAEO_WORKSPACE.

        Raises:
            ToolError: If an output argument escapes the workspace
        """
        request_id = getattr(context, 'request_id', str(uuid.uuid4()))
        tool_name = getattr(context.message, 'name', None) or str(context.source)

        if not config.is_workspace_restricted():
            return await call_next(context)

        arguments: Mapping[str, Any] = context.message.arguments or {}
        outputs = [str(arguments[key]) for key in OUTPUT_ARGUMENTS if arguments.get(key)]
        rejected = _outside(outputs, config.workspace)

        logger.debug(
            f"Workspace middleware checking tool: {tool_name}",
            extra={
                "request_id": request_id,
                "extra_fields": {
                    "tool_name": tool_name,
                    "workspace": str(config.workspace),
                    "outputs": outputs
                }
            }
        )

        if rejected:
            logger.error(
                f"Output path outside workspace for tool: {tool_name}",
                extra={
                    "request_id": request_id,
                    "extra_fields": {
                        "tool_name": tool_name,
                        "rejected": rejected
                    }
                }
            )
            raise ToolError(f"output paths outside workspace {config.workspace}: {', '.join(rejected)}")

        return await call_next(context)
