#!/usr/bin/env python3
"""
Tool server checks:
1. All imports work and the server can be instantiated
2. Middleware and every pipeline tool are registered
3. Tools run end to end through the middleware chain
4. Workspace guard and usage tracking behave as configured
"""

import asyncio
import json
import os
import sys
from pathlib import Path

import pytest
from fastmcp import Client
from fastmcp.exceptions import ToolError

sys.path.insert(0, os.path.dirname(__file__))

from src.server import SERVER_NAME, create_server
from src.utils.config import config


EXPECTED_TOOLS = {
    "fuse_depth",
    "align_trajectories",
    "build_skeleton",
    "adjust_survey",
    "render_stickmap",
    "select_area",
    "generate_synthetic",
    "run_pipeline",
}

TRIANGLE_SHOTS = (
    "from,to,length_m,azimuth_in_deg,azimuth_out_deg,depth_from_m,depth_to_m\n"
    "A,B,10.0,90.0,90.0,5.0,5.0\n"
    "B,C,10.0,0.0,0.0,5.0,5.0\n"
    "C,A,14.142135623730951,225.0,225.0,5.0,5.0\n"
)


@pytest.fixture
def isolated_config(tmp_path, monkeypatch):
    """Point usage storage at tmp_path and lift any workspace restriction."""
    monkeypatch.setattr(config, "db_dir", tmp_path / "database")
    monkeypatch.setattr(config, "workspace", None)
    return tmp_path


def _call(tool: str, arguments: dict):
    async def go():
        async with Client(create_server()) as client:
            return await client.call_tool(tool, arguments)

    return asyncio.run(go())


def test_imports():
    """Test that the server modules import."""
    from src.middleware.register_middleware import register_all_middleware
    from src.middleware.usage_middleware import UsageTrackingMiddleware
    from src.middleware.workspace_middleware import WorkspaceMiddleware
    from src.tools.pipeline.pipeline_tools import register_pipeline_tools
    from src.utils.storage import load_from_database, save_to_database

    assert callable(register_all_middleware)
    assert callable(register_pipeline_tools)
    assert UsageTrackingMiddleware and WorkspaceMiddleware
    assert callable(save_to_database) and callable(load_from_database)


def test_server_initialization():
    """Test that the server registers every pipeline tool."""
    server = create_server()
    assert server.name == SERVER_NAME

    async def names():
        async with Client(server) as client:
            return {tool.name for tool in await client.list_tools()}

    assert asyncio.run(names()) == EXPECTED_TOOLS


def test_config():
    """Test environment configuration defaults."""
    assert isinstance(config.log_level, int)
    assert config.transport in ("stdio", "http")
    assert config.port > 0
    assert config.db_dir is not None


def test_file_structure():
    """Test that all required files exist."""
    required_files = [
        "main.py",
        "pyproject.toml",
        ".env.example",
        "src/__init__.py",
        "src/server.py",
        "src/cli/commands.py",
        "src/middleware/register_middleware.py",
        "src/middleware/usage_middleware.py",
        "src/middleware/workspace_middleware.py",
        "src/tools/pipeline/pipeline_tools.py",
        "src/tools/pipeline/step_tools.py",
        "src/utils/config.py",
        "src/utils/logging.py",
        "src/utils/storage.py",
    ]
    base_dir = Path(__file__).parent
    missing = [f for f in required_files if not (base_dir / f).exists()]
    assert missing == []


def test_adjust_survey_tool_writes_stations(isolated_config):
    shots = isolated_config / "shots.csv"
    shots.write_text(TRIANGLE_SHOTS)
    out = isolated_config / "stations.csv"

    _call("adjust_survey", {"shots": str(shots), "out": str(out), "anchor": "A"})

    lines = out.read_text().splitlines()
    assert "station,x_m,y_m,z_m,depth_m" in lines
    assert any(line.startswith("B,") for line in lines)


def test_data_errors_become_tool_errors(isolated_config):
    shots = isolated_config / "shots.csv"
    shots.write_text(TRIANGLE_SHOTS.replace("90.0,90.0", "400.0,90.0"))

    with pytest.raises(ToolError, match="shots.csv:2"):
        _call("adjust_survey", {"shots": str(shots), "out": str(isolated_config / "s.csv")})


def test_usage_tracking_records_success_and_failure(isolated_config):
    shots = isolated_config / "shots.csv"
    shots.write_text(TRIANGLE_SHOTS)
    _call("render_stickmap", {"shots": str(shots), "svg": str(isolated_config / "map.svg")})
    with pytest.raises(ToolError):
        _call("render_stickmap", {"shots": str(isolated_config / "nope.csv"), "svg": str(isolated_config / "x.svg")})

    stored = json.loads((isolated_config / "database/middleware/usage/render_stickmap.json").read_text())
    stats = stored["data"]
    assert stats["total_calls"] == 2
    assert stats["successful_calls"] == 1
    assert stats["failed_calls"] == 1
    assert len(stats["errors"]) == 1
    assert stats["average_execution_time"] == pytest.approx(stats["total_execution_time"] / 2)


def test_storage_round_trip(isolated_config):
    from src.utils.storage import load_from_database, save_to_database

    assert load_from_database("middleware/usage/never_called") == {}
    path = Path(save_to_database("middleware/usage/adjust_survey", {"total_calls": 3}))
    assert path == isolated_config / "database/middleware/usage/adjust_survey.json"
    assert load_from_database("middleware/usage/adjust_survey")["data"] == {"total_calls": 3}
    assert [p.name for p in path.parent.iterdir()] == ["adjust_survey.json"]


def test_workspace_guard_rejects_outside_outputs(isolated_config, monkeypatch):
    workspace = isolated_config / "workspace"
    workspace.mkdir()
    monkeypatch.setattr(config, "workspace", workspace.resolve())
    shots = isolated_config / "shots.csv"
    shots.write_text(TRIANGLE_SHOTS)

    outside = isolated_config / "elsewhere.svg"
    with pytest.raises(ToolError, match="outside workspace"):
        _call("render_stickmap", {"shots": str(shots), "svg": str(outside)})
    assert not outside.exists()

    inside = workspace / "map.svg"
    _call("render_stickmap", {"shots": str(shots), "svg": str(inside)})
    assert inside.read_text().lstrip().startswith("<?xml")


def test_run_pipeline_keeps_out_dir_inside_workspace(isolated_config, monkeypatch):
    from src.synth import CorridorSpec, generate, write_bundle

    workspace = isolated_config / "workspace"
    workspace.mkdir()
    monkeypatch.setattr(config, "workspace", workspace.resolve())
    bundle_dir = workspace / "bundle"
    spec = CorridorSpec(waypoints=((0.0, 0.0, 10.0), (14.0, 2.0, 15.0), (28.0, 7.0, 13.0)), wall_density=2.0)
    write_bundle(generate(spec), bundle_dir)

    escaping = bundle_dir / "escaping.toml"
    escaping.write_text((bundle_dir / "pipeline.toml").read_text().replace('out_dir = "out"', 'out_dir = "../../elsewhere"'))
    with pytest.raises(ToolError, match="outside workspace"):
        _call("run_pipeline", {"config": str(escaping)})
    assert not (isolated_config / "elsewhere").exists()

    _call("run_pipeline", {"config": str(bundle_dir / "pipeline.toml")})
    assert (bundle_dir / "out" / "pipeline.json").is_file()


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
