import logging
import os
import tomllib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from dotenv import load_dotenv

from .errors import ConfigError

load_dotenv()

REPO_ROOT = Path(__file__).parent.parent.parent


class EnvConfig:
    """Process-wide settings read from the environment (and a .env file)."""

    def __init__(self):
        level_name = os.getenv("SPELAEO_LOG", "INFO").strip().upper()
        self.log_level = logging.getLevelName(level_name)
        if not isinstance(self.log_level, int):
            self.log_level = logging.INFO
        workspace = os.getenv("SPELAEO_WORKSPACE", "").strip()
        self.workspace = Path(workspace).resolve() if workspace else None
        self.db_dir = Path(os.getenv("SPELAEO_DB_DIR", str(REPO_ROOT / "database")))
        self.transport = os.getenv("MCP_TRANSPORT", "stdio")
        self.port = int(os.getenv("PORT", "8000"))

    def is_workspace_restricted(self) -> bool:
        """Check whether tool outputs are confined to a workspace directory."""
        return self.workspace is not None


config = EnvConfig()


def _require(condition: bool, section: str, key: str, rule: str) -> None:
    if not condition:
        raise ConfigError(f"[{section}] {key} must be {rule}")


@dataclass(frozen=True)
class DepthSettings:
    rate: float = 100.0
    max_shift: float = 1200.0
    min_overlap: float = 30.0
    nominal_spacing: float = 10.0

    def __post_init__(self):
        for key in ("rate", "max_shift", "min_overlap", "nominal_spacing"):
            _require(getattr(self, key) > 0, "depth", key, "> 0")


@dataclass(frozen=True)
class AlignSettings:
    association_tolerance: float = 0.02

    def __post_init__(self):
        _require(self.association_tolerance > 0, "align", "association_tolerance", "> 0")


@dataclass(frozen=True)
class SkeletonSettings:
    center_index: int = 1
    flag_radius: float = 1.0
    depth_tol: float = 0.2
    lateral_radius: float = 0.5

    def __post_init__(self):
        _require(self.center_index >= 0, "skeleton", "center_index", ">= 0")
        for key in ("flag_radius", "depth_tol", "lateral_radius"):
            _require(getattr(self, key) > 0, "skeleton", key, "> 0")


@dataclass(frozen=True)
class SurveySettings:
    declination: float = 0.0
    anchor: Optional[str] = None

    def __post_init__(self):
        _require(-180.0 <= self.declination <= 180.0, "survey", "declination", "within [-180, 180]")


@dataclass(frozen=True)
class AreaSettings:
    radius: float = 2.5
    image_pattern: str = "{camera_id}/{timestamp:.6f}.png"
    time_tolerance: float = 0.1

    def __post_init__(self):
        _require(self.radius > 0, "area", "radius", "> 0")
        _require(self.time_tolerance > 0, "area", "time_tolerance", "> 0")


@dataclass(frozen=True)
class SynthSettings:
    seed: int = 0


@dataclass(frozen=True)
class DatasetEntry:
    name: str
    trajectory: Path
    depth_log: Path
    observations: Path
    cloud: Optional[Path] = None


@dataclass(frozen=True)
class AreaEntry:
    name: str
    center_time: float
    radius: Optional[float] = None

    def __post_init__(self):
        if self.radius is not None:
            _require(self.radius > 0, "pipeline.areas", "radius", "> 0")


@dataclass(frozen=True)
class PipelineSettings:
    out_dir: Path = Path("out")
    reference: Optional[str] = None
    center: Optional[str] = None
    workers: int = 1
    shots: Optional[Path] = None
    closures: Optional[Path] = None
    datasets: Tuple[DatasetEntry, ...] = ()
    areas: Tuple[AreaEntry, ...] = ()

    def __post_init__(self):
        _require(self.workers >= 1, "pipeline", "workers", ">= 1")
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ConfigError("[pipeline] dataset names must be unique")
        for key in ("reference", "center"):
            value = getattr(self, key)
            if value is not None and value not in names:
                raise ConfigError(f"[pipeline] {key} '{value}' is not a dataset name")


@dataclass(frozen=True)
class PipelineConfig:
    """Per-module parameter blocks plus pipeline inputs and outputs."""

    depth: DepthSettings = field(default_factory=DepthSettings)
    align: AlignSettings = field(default_factory=AlignSettings)
    skeleton: SkeletonSettings = field(default_factory=SkeletonSettings)
    survey: SurveySettings = field(default_factory=SurveySettings)
    area: AreaSettings = field(default_factory=AreaSettings)
    synth: SynthSettings = field(default_factory=SynthSettings)
    pipeline: PipelineSettings = field(default_factory=PipelineSettings)


_PATH_KEYS = {"out_dir", "shots", "closures", "trajectory", "depth_log", "observations", "cloud"}


def _coerce(section: str, key: str, kind: Any, raw: Any) -> Any:
    if kind in (float, Optional[float]):
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ConfigError(f"[{section}] {key} must be a number")
        return float(raw)
    if kind is int:
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise ConfigError(f"[{section}] {key} must be an integer")
        return raw
    if kind in (str, Optional[str]):
        if not isinstance(raw, str):
            raise ConfigError(f"[{section}] {key} must be a string")
        return raw
    return raw


def _build_block(cls, table: Mapping[str, Any], section: str, base_dir: Path):
    if not isinstance(table, Mapping):
        raise ConfigError(f"[{section}] must be a table")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(table) - set(known))
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {', '.join(unknown)}")

    values: Dict[str, Any] = {}
    for key, raw in table.items():
        if key in _PATH_KEYS:
            if not isinstance(raw, str):
                raise ConfigError(f"[{section}] {key} must be a path string")
            path = Path(raw)
            values[key] = path if path.is_absolute() else base_dir / path
        else:
            values[key] = _coerce(section, key, known[key].type, raw)

    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigError(f"[{section}] {e}") from e


def _build_pipeline(table: Mapping[str, Any], base_dir: Path) -> PipelineSettings:
    table = dict(table)
    datasets = table.pop("datasets", [])
    areas = table.pop("areas", [])
    if not isinstance(datasets, list) or not isinstance(areas, list):
        raise ConfigError("[pipeline] datasets and areas must be arrays of tables")
    table["datasets"] = tuple(_build_block(DatasetEntry, d, "pipeline.datasets", base_dir) for d in datasets)
    table["areas"] = tuple(_build_block(AreaEntry, a, "pipeline.areas", base_dir) for a in areas)
    return _build_block(PipelineSettings, table, "pipeline", base_dir)


_SECTIONS = {
    "depth": DepthSettings,
    "align": AlignSettings,
    "skeleton": SkeletonSettings,
    "survey": SurveySettings,
    "area": AreaSettings,
    "synth": SynthSettings,
}


def parse_pipeline_config(text: str, base_dir: Path = Path(".")) -> PipelineConfig:
    """
    Parse a TOML pipeline configuration.

    Args:
        text: TOML document
        base_dir: Directory relative paths are resolved against

    Returns:
        Validated PipelineConfig

    Raises:
        ConfigError: On TOML syntax errors, unknown keys or out-of-range values
    """
    try:
        document = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML: {e}") from e

    unknown = sorted(set(document) - set(_SECTIONS) - {"pipeline"})
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(unknown)}")

    blocks = {
        name: _build_block(cls, document[name], name, base_dir)
        for name, cls in _SECTIONS.items()
        if name in document
    }
    if "pipeline" in document:
        blocks["pipeline"] = _build_pipeline(document["pipeline"], base_dir)
    return PipelineConfig(**blocks)


def load_pipeline_config(path: Optional[Path]) -> PipelineConfig:
    """Load a pipeline configuration file, or defaults when no path is given."""
    if path is None:
        return PipelineConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_pipeline_config(path.read_text(encoding="utf-8"), base_dir=path.parent)
