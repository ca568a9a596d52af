from fastmcp import FastMCP

from .middleware.register_middleware import register_all_middleware
from .tools.pipeline.pipeline_tools import register_pipeline_tools
from .utils.config import config
from .utils.logging import get_logger


logger = get_logger(__name__)

SERVER_NAME = "Spelaeo Cave Mapping Server"


def create_server() -> FastMCP:
    """Build the MCP server with middleware and every pipeline tool registered."""
    logger.info(f"Initializing {SERVER_NAME}")
    server = FastMCP(name=SERVER_NAME)

    logger.info("Registering middleware")
    register_all_middleware(server)

    logger.info("Registering pipeline tools")
    register_pipeline_tools(server)
    return server


def serve(transport: str = None, port: int = None) -> None:
    """
    Run the MCP server until interrupted.

    Args:
        transport: "stdio" or "http"; defaults to MCP_TRANSPORT
        port: HTTP port; defaults to PORT
    """
    transport = transport or config.transport
    port = port or config.port
    server = create_server()

    logger.info(
        "Starting MCP server",
        extra={
            "extra_fields": {
                "transport": transport,
                "port": port if transport == "http" else None
            }
        }
    )

    try:
        if transport == "http":
            logger.info(
                f"Server starting on HTTP transport at 0.0.0.0:{port}",
                extra={"extra_fields": {"transport": "http", "host": "0.0.0.0", "port": port}}
            )
            server.run(transport="http", host="0.0.0.0", port=port)
        else:
            logger.info(
                "Server starting on stdio transport",
                extra={"extra_fields": {"transport": "stdio"}}
            )
            server.run(transport="stdio")
    except Exception as e:
        logger.error(
            f"Server failed to start: {str(e)}",
            extra={"extra_fields": {"transport": transport, "error": str(e)}},
            exc_info=True
        )
        raise
    finally:
        logger.info("Server shutdown")
