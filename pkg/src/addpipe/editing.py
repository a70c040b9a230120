"""Dual-condition guidance: dropout sampling, score combination, latent editing and chaining."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class ConditioningPair:
    """Text/image condition encodings; None is the explicit "absent" state."""

    c_T: object | None = None
    c_I: object | None = None


@dataclass(frozen=True)
class GuidanceScales:
    s_T: float
    s_I: float

    def __post_init__(self):
        for name, value in (("s_T", self.s_T), ("s_I", self.s_I)):
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {value}")


@dataclass(frozen=True)
class LatentState:
    z_t: np.ndarray
    t: int


@dataclass(frozen=True)
class DropoutConfig:
    p_text_only: float = 0.05
    p_image_only: float = 0.05
    p_both: float = 0.05

    def __post_init__(self):
        probs = (self.p_text_only, self.p_image_only, self.p_both)
        if any(p < 0 or p > 1 for p in probs):
            raise ValueError("dropout probabilities must lie in [0, 1]")
        if sum(probs) > 1:
            raise ValueError("dropout probabilities must sum to at most 1")


@dataclass(frozen=True)
class TrainHyperparams:
    """Training-run settings record, emitted into training manifests and run logs."""

    lr: float = 5e-5
    epochs: int = 60
    per_worker_batch: int = 128
    grad_accum: int = 4
    resolution: int = 256
    workers: int = 8
    effective_batch: int = 4096
    finetune_lr: float = 1e-6
    finetune_epochs: int = 250
    finetune_batch: int = 8

    def __post_init__(self):
        expected = self.per_worker_batch * self.workers * self.grad_accum
        if self.effective_batch != expected:
            raise ValueError(
                f"effective_batch {self.effective_batch} != per_worker_batch x workers x grad_accum ({expected})"
            )

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "epochs": self.epochs,
            "per_worker_batch": self.per_worker_batch,
            "grad_accum": self.grad_accum,
            "resolution": self.resolution,
            "workers": self.workers,
            "effective_batch": self.effective_batch,
            "finetune_lr": self.finetune_lr,
            "finetune_epochs": self.finetune_epochs,
            "finetune_batch": self.finetune_batch,
        }


def dropout_conditions(pair: ConditioningPair, cfg: DropoutConfig, u: float) -> ConditioningPair:
    """Partition one uniform draw into three disjoint drop events.

    [0, p1) drops the text condition, [p1, p1+p2) the image condition,
    [p1+p2, p1+p2+p3) both; anything above keeps the pair unchanged.
    """
    p1 = cfg.p_text_only
    p2 = p1 + cfg.p_image_only
    p3 = p2 + cfg.p_both
    if u < p1:
        return ConditioningPair(c_T=None, c_I=pair.c_I)
    if u < p2:
        return ConditioningPair(c_T=pair.c_T, c_I=None)
    if u < p3:
        return ConditioningPair(c_T=None, c_I=None)
    return pair


def cfg_combine(e_uncond: np.ndarray, e_img: np.ndarray, e_full: np.ndarray, scales: GuidanceScales) -> np.ndarray:
    """e_uncond + s_I (e_img - e_uncond) + s_T (e_full - e_img).

    Evaluated with grouped coefficients so the telescoping identities
    (s_I = s_T = 1 -> e_full; s_I = 1, s_T = 0 -> e_img) hold exactly in
    floating point.
    """
    e_uncond = np.asarray(e_uncond)
    e_img = np.asarray(e_img)
    e_full = np.asarray(e_full)
    if not (e_uncond.shape == e_img.shape == e_full.shape):
        raise ValueError(
            f"score shapes differ: {e_uncond.shape}, {e_img.shape}, {e_full.shape}"
        )
    s_T, s_I = scales.s_T, scales.s_I
    return (1.0 - s_I) * e_uncond + (s_I - s_T) * e_img + s_T * e_full


@dataclass(frozen=True)
class SamplingSchedule:
    """Deterministic schedule: (timestep, step size) pairs consumed in order."""

    steps: tuple = ()

    @classmethod
    def uniform(cls, n_steps: int, step_size: float) -> "SamplingSchedule":
        return cls(tuple((t, step_size) for t in range(n_steps - 1, -1, -1)))


def edit_latent(
    latent: np.ndarray,
    instruction_encoding,
    image_encoding,
    denoiser,
    scales: GuidanceScales,
    schedule: SamplingSchedule,
) -> np.ndarray:
    """Run the schedule, combining three denoiser scores per step.

    Each step queries score(z, none, none), score(z, none, c_I), and
    score(z, c_T, c_I), then descends along the combined score.
    """
    z = np.array(latent, dtype=np.float64)
    for t, step_size in schedule.steps:
        state = LatentState(z_t=z, t=t)
        e_uncond = denoiser.score(state, None, None)
        e_img = denoiser.score(state, None, image_encoding)
        e_full = denoiser.score(state, instruction_encoding, image_encoding)
        z = z - step_size * cfg_combine(e_uncond, e_img, e_full, scales)
    return z


def multi_edit_latent_chain(
    initial_image,
    instructions: list,
    codec,
    denoiser,
    scales: GuidanceScales,
    schedule: SamplingSchedule,
):
    """Apply several edits in latent space with exactly one encode and one decode.

    Each edit conditions on the latent it starts from, avoiding the per-edit
    codec round trips that degrade chained results.
    """
    if not instructions:
        raise ValueError("instruction list must be non-empty")
    z = codec.encode(initial_image)
    for instruction in instructions:
        z = edit_latent(z, instruction, z, denoiser, scales, schedule)
    return codec.decode(z)


@dataclass
class TrainingManifest:
    dataset_path: str
    dropout: DropoutConfig = field(default_factory=DropoutConfig)
    hyperparams: TrainHyperparams = field(default_factory=TrainHyperparams)

    def to_dict(self) -> dict:
        return {
            "dataset_path": self.dataset_path,
            "dropout": {
                "p_text_only": self.dropout.p_text_only,
                "p_image_only": self.dropout.p_image_only,
                "p_both": self.dropout.p_both,
            },
            "hyperparams": self.hyperparams.to_dict(),
        }


def emit_training_manifest(manifest: TrainingManifest, path) -> None:
    """Write the external-trainer handoff file (dataset location + settings)."""
    Path(path).write_text(json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n")


def read_training_manifest(path) -> TrainingManifest:
    data = json.loads(Path(path).read_text())
    return TrainingManifest(
        dataset_path=data["dataset_path"],
        dropout=DropoutConfig(**data.get("dropout", {})),
        hyperparams=TrainHyperparams(**data.get("hyperparams", {})),
    )
