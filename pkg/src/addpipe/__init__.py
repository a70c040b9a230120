"""Object-addition editing dataset toolkit.

Curates (inpainted source, original target) image pairs from segmentation
corpora, synthesizes natural-language addition instructions, evaluates editing
models, and calibrates filter thresholds with a human-in-the-loop workflow.
"""

__version__ = "0.1.0"

from .backends import make_remote_backends, make_stub_backends
from .config import PipelineConfig, load_config
from .manifest import read_manifest, write_manifest
from .pipeline import Workspace, run_all, run_stage
from .records import DatasetManifest, EditPairRecord, FunnelStats, Instruction

__all__ = [
    "DatasetManifest",
    "EditPairRecord",
    "FunnelStats",
    "Instruction",
    "PipelineConfig",
    "Workspace",
    "load_config",
    "make_remote_backends",
    "make_stub_backends",
    "read_manifest",
    "run_all",
    "run_stage",
    "write_manifest",
]
