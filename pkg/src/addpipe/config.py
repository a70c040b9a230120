"""Pipeline configuration: defaults, file loading, digesting, and fragment merge.

Every filtering threshold here is data, not code: the shipped defaults are
placeholders meant to be re-derived per backend through the calibration
workflow and merged back via ``merge_fragment``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import yaml

from .editing import DropoutConfig


@dataclass
class DilationConfig:
    k: float = 0.05
    r_min: int = 3
    r_max: int = 25
    element: str = "square"


@dataclass
class PreRemovalConfig:
    min_area_frac: float = 0.005
    max_area_frac: float = 0.30
    border_margin_frac: float = 0.05
    abnormality_threshold: float = 0.21
    dilation: DilationConfig = field(default_factory=DilationConfig)


@dataclass
class RemovalConfig:
    n_candidates: int = 3
    steps: int = 10
    seed_base: int = 0


@dataclass
class PostRemovalConfig:
    consensus_threshold: float = 0.045
    mm_threshold: float = 0.25
    shift_delta: float = 0.15
    importance_threshold: float = 0.95
    feather_sigma_rule: str = "radius/2"


@dataclass
class InstructionsConfig:
    location_p: float = 0.25
    icl_k: int = 5
    icl_bank_file: str = ""
    reference_file: str = ""


@dataclass
class EditingConfig:
    dropout: DropoutConfig = field(default_factory=DropoutConfig)
    sampler_steps: int = 20
    sampler_step_size: float = 0.1
    s_text: float = 7.0
    s_image: float = 1.5


@dataclass
class EvaluationConfig:
    cmmd_bandwidth: float = 10.0
    cmmd_scale: float = 1000.0
    s_text_fixed: float = 7.0
    s_image_values: tuple = (1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5)


@dataclass
class CalibrationConfig:
    plateau_epsilon: float = 0.05
    sample_n: int = 500
    sample_seed: int = 0
    stratify_by_label: bool = False
    auth_token_env: str = ""


@dataclass
class RemoteConfig:
    base_url: str = "http://localhost:8800"
    token_env: str = "ADDPIPE_BACKEND_TOKEN"
    timeout_s: float = 30.0
    retries: int = 3
    backoff_s: float = 0.5
    max_in_flight: int = 4


@dataclass
class BackendsConfig:
    kind: str = "stub"
    embed_dim: int = 512
    remote: RemoteConfig = field(default_factory=RemoteConfig)


@dataclass
class PipelineConfig:
    seed: int = 0
    workers: int = 1
    image_size: int = 64
    pre_removal: PreRemovalConfig = field(default_factory=PreRemovalConfig)
    removal: RemovalConfig = field(default_factory=RemovalConfig)
    post_removal: PostRemovalConfig = field(default_factory=PostRemovalConfig)
    instructions: InstructionsConfig = field(default_factory=InstructionsConfig)
    editing: EditingConfig = field(default_factory=EditingConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    backends: BackendsConfig = field(default_factory=BackendsConfig)

    def to_dict(self) -> dict:
        return _normalize(asdict(self))

    def digest(self) -> str:
        """Stable hash of the effective config; workers excluded (parallelism never changes outputs)."""
        payload = self.to_dict()
        payload.pop("workers", None)
        return hashlib.sha256(json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()).hexdigest()[:16]


def _normalize(obj):
    if isinstance(obj, dict):
        return {k: _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    return obj


def _build(cls, data: dict):
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        default = f.default_factory() if callable(f.default_factory) else None
        if is_dataclass(default) and isinstance(value, dict):
            kwargs[f.name] = _build(type(default), value)
        elif isinstance(default, tuple) or f.name == "s_image_values":
            kwargs[f.name] = tuple(value)
        else:
            kwargs[f.name] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> PipelineConfig:
    return _build(PipelineConfig, data or {})


def load_config(path=None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    text = Path(path).read_text()
    data = yaml.safe_load(text) or {}
    return config_from_dict(data)


def save_config(config: PipelineConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config.to_dict(), sort_keys=True))


def merge_fragment(config: PipelineConfig, fragment: dict) -> PipelineConfig:
    """Merge a nested key fragment (e.g. from exported thresholds) into a config.

    Merging the same fragment twice yields an identical config.
    """
    data = config.to_dict()

    def apply(target: dict, patch: dict):
        for key, value in patch.items():
            if isinstance(value, dict) and isinstance(target.get(key), dict):
                apply(target[key], value)
            else:
                target[key] = value

    apply(data, fragment)
    return config_from_dict(data)


def feather_sigma_for(radius_px: int, rule: str) -> float:
    """Resolve a feather-sigma rule ("radius/2" style or a plain number) for a dilation radius."""
    rule = str(rule).strip()
    if rule.startswith("radius/"):
        return radius_px / float(rule.split("/", 1)[1])
    if rule == "radius":
        return float(radius_px)
    return float(rule)
