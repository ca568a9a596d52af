import time
import uuid
from datetime import datetime, timezone
from typing import Any, Dict, Optional

from fastmcp.server.middleware import Middleware, MiddlewareContext
from fastmcp.tools.tool import ToolResult
from mcp import types as mt

from ..utils.logging import get_logger
from ..utils.storage import save_to_database, load_from_database


logger = get_logger(__name__)

MAX_RECENT_ERRORS = 10


def _empty_stats(tool_name: str) -> Dict[str, Any]:
    return {
        "tool_name": tool_name,
        "total_calls": 0,
        "successful_calls": 0,
        "failed_calls": 0,
        "total_execution_time": 0.0,
        "average_execution_time": 0.0,
        "max_execution_time": 0.0,
        "error_types": {},
        "last_called": None,
        "last_request_id": None,
        "errors": []
    }


class UsageTrackingMiddleware(Middleware):
    """Middleware recording per-tool call counts, timings and recent failures."""

    async def on_call_tool(
        self,
        context: MiddlewareContext[mt.CallToolRequestParams],
        call_next,
    ) -> ToolResult:
        """
        Time the tool call and persist its statistics under middleware/usage/<tool>.

        Args:
            context: Middleware context containing tool information
            call_next: Next middleware in chain

        Returns:
            Tool result from next middleware
        """
        request_id = str(uuid.uuid4())

        tool_name = getattr(context.message, 'name', None) or str(context.source)
        start_time = time.perf_counter()

        logger.info(
            f"Starting tool execution: {tool_name}",
            extra={
                "request_id": request_id,
                "extra_fields": {
                    "tool_name": tool_name,
                    "arguments": sorted((context.message.arguments or {}).keys())
                }
            }
        )

        try:
            result = await call_next(context)

            execution_time = time.perf_counter() - start_time
            self._track_usage(tool_name, execution_time, request_id=request_id)

            logger.info(
                f"Tool {tool_name} completed in {execution_time:.2f}s",
                extra={
                    "request_id": request_id,
                    "execution_time_ms": execution_time * 1000,
                    "extra_fields": {
                        "tool_name": tool_name,
                        "success": True
                    }
                }
            )

            return result

        except Exception as e:
            execution_time = time.perf_counter() - start_time
            self._track_usage(tool_name, execution_time, request_id=request_id, error=e)

            logger.error(
                f"Tool {tool_name} failed after {execution_time:.2f}s: {str(e)}",
                extra={
                    "request_id": request_id,
                    "execution_time_ms": execution_time * 1000,
                    "extra_fields": {
                        "tool_name": tool_name,
                        "success": False,
                        "error_type": type(e).__name__
                    }
                }
            )

            raise

    def _track_usage(
        self,
        tool_name: str,
        execution_time: float,
        request_id: str,
        error: Optional[Exception] = None,
    ) -> None:
        """
        Fold one call into the stored statistics for the tool.

        Storage failures are logged and swallowed so a tool call never fails on bookkeeping.
        """
        schema = f"middleware/usage/{tool_name}"
        try:
            stats = load_from_database(schema).get("data") or _empty_stats(tool_name)
            now = datetime.now(timezone.utc).isoformat()

            stats["total_calls"] += 1
            stats["total_execution_time"] += execution_time
            stats["max_execution_time"] = max(stats["max_execution_time"], execution_time)
            stats["average_execution_time"] = stats["total_execution_time"] / stats["total_calls"]
            stats["last_called"] = now
            stats["last_request_id"] = request_id

            if error is None:
                stats["successful_calls"] += 1
            else:
                stats["failed_calls"] += 1
                kind = type(error).__name__
                stats["error_types"][kind] = stats["error_types"].get(kind, 0) + 1
                stats["errors"].append({
                    "timestamp": now,
                    "request_id": request_id,
                    "error_type": kind,
                    "error": str(error)
                })
                stats["errors"] = stats["errors"][-MAX_RECENT_ERRORS:]

            save_to_database(schema, stats)

        except Exception as e:
            logger.error(
                f"Failed to track usage for {tool_name}: {str(e)}",
                extra={
                    "request_id": request_id,
                    "extra_fields": {
                        "tool_name": tool_name,
                        "error": str(e)
                    }
                },
                exc_info=True
            )
