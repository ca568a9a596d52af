from fastmcp import FastMCP
from .step_tools import register_step_tools


def register_pipeline_tools(server: FastMCP) -> None:
    """Register all pipeline tools."""
    register_step_tools(server)
