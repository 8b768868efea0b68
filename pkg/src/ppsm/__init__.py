"""Partial-to-partial shape matching with geometric consistency via integer programming."""

from .mesh import TriangleMesh, load_mesh
from .multires import PipelineConfig, run_pipeline

__version__ = "0.1.0"
__all__ = ["TriangleMesh", "load_mesh", "PipelineConfig", "run_pipeline", "__version__"]
