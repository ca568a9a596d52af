from fastmcp import FastMCP

from .workspace_middleware import WorkspaceMiddleware
from .usage_middleware import UsageTrackingMiddleware
from ..utils.logging import get_logger


logger = get_logger(__name__)


def register_all_middleware(server: FastMCP) -> None:
    """
    Register all middleware in the correct order.

    Middleware order matters:
    1. WorkspaceMiddleware - Rejects out-of-workspace outputs before any work
    2. UsageTrackingMiddleware - Tracks usage of calls that passed the check

    Args:
        server: FastMCP server instance
    """
    logger.info("Registering middleware...")

    server.add_middleware(WorkspaceMiddleware())
    logger.info("Registered WorkspaceMiddleware")

    server.add_middleware(UsageTrackingMiddleware())
    logger.info("Registered UsageTrackingMiddleware")

    logger.info("All middleware registered successfully")
