from .bundle import pipeline_config_text, write_bundle
from .corridor import CorridorSpec, load_corridor_spec, parse_corridor_spec
from .generate import SynthBundle, generate

__all__ = [
    "CorridorSpec",
    "SynthBundle",
    "generate",
    "load_corridor_spec",
    "parse_corridor_spec",
    "pipeline_config_text",
    "write_bundle",
]
