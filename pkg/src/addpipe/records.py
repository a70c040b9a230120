"""Domain types shared by every pipeline stage."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ManifestError

STAGES = ("ingest", "prefilter", "remove", "postfilter", "instructions", "assemble")

INSTRUCTION_KINDS = ("class_template", "vlm_llm", "reference")

LOCATION_LABELS = (
    "top-left", "top", "top-right",
    "left", "center", "right",
    "bottom-left", "bottom", "bottom-right",
)

PASS, FAIL, PENDING = "pass", "fail", "pending"


def pair_id_for(record_id: str, annotation_id) -> str:
    """Stable pair identifier; reruns over the same corpus reproduce it."""
    digest = hashlib.sha256(f"{record_id}\x1f{annotation_id}".encode()).hexdigest()
    return digest[:16]


@dataclass(frozen=True)
class ImageRecord:
    record_id: str
    image_ref: str
    width: int
    height: int
    source_tag: str = "unknown"

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"image {self.record_id}: non-positive dimensions")


@dataclass(frozen=True)
class MaskAnnotation:
    record_id: str
    annotation_id: str
    object_label: str
    mask: np.ndarray
    area_px: int
    bbox: tuple[int, int, int, int]

    @classmethod
    def from_mask(cls, record_id: str, annotation_id, object_label: str, mask: np.ndarray) -> "MaskAnnotation":
        from .rasters import mask_area, mask_bbox

        return cls(
            record_id=record_id,
            annotation_id=str(annotation_id),
            object_label=object_label,
            mask=mask,
            area_px=mask_area(mask),
            bbox=mask_bbox(mask),
        )


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if self.normalized and abs(float(np.linalg.norm(values)) - 1.0) > 1e-6:
            raise ValueError("embedding flagged normalized but norm deviates from 1")

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])

    def unit(self) -> "EmbeddingVector":
        norm = float(np.linalg.norm(self.values))
        if norm == 0.0:
            raise ValueError("cannot normalize a zero embedding")
        return EmbeddingVector(self.values / norm, normalized=True)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    av, bv = a.values, b.values
    na, nb = float(np.linalg.norm(av)), float(np.linalg.norm(bv))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine undefined for zero vectors")
    return float(np.dot(av, bv) / (na * nb))


@dataclass
class RemovalCandidate:
    pair_id: str
    candidate_index: int
    image_ref: str
    seed: int
    region_embedding: EmbeddingVector | None = None
    mm_clip_score: float | None = None


@dataclass(frozen=True)
class Instruction:
    text: str
    kind: str
    location_phrase: str | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.text:
            raise ValueError("instruction text must be non-empty")
        if self.kind not in INSTRUCTION_KINDS:
            raise ValueError(f"unknown instruction kind '{self.kind}'")
        if self.location_phrase is not None and self.location_phrase not in LOCATION_LABELS:
            raise ValueError(f"location phrase '{self.location_phrase}' not in the nine-cell vocabulary")

    def to_dict(self) -> dict:
        d = {"text": self.text, "kind": self.kind}
        if self.location_phrase is not None:
            d["location_phrase"] = self.location_phrase
        if self.provenance:
            d["provenance"] = self.provenance
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Instruction":
        return cls(
            text=d["text"],
            kind=d["kind"],
            location_phrase=d.get("location_phrase"),
            provenance=d.get("provenance", {}),
        )


@dataclass
class EditPairRecord:
    """One (image, object mask) unit with its per-stage outcome."""

    pair_id: str
    record_id: str
    object_label: str
    mask_ref: str
    target_image_ref: str
    annotation_id: str | None = None
    dilated_mask_ref: str | None = None
    stage_flags: dict = field(default_factory=dict)
    scores: dict = field(default_factory=dict)
    fail_reason: str | None = None
    selected_candidate: int | None = None
    source_image_ref: str | None = None
    seed: int | None = None

    def flag(self, stage: str) -> str:
        return self.stage_flags.get(stage, PENDING)

    def mark(self, stage: str, outcome: str, reason: str | None = None) -> None:
        self.stage_flags[stage] = outcome
        if outcome == FAIL:
            self.fail_reason = reason or stage
            self.selected_candidate = None
            self.seed = None
            self.source_image_ref = None

    @property
    def failed(self) -> bool:
        return FAIL in self.stage_flags.values()

    def validate(self) -> None:
        if self.failed and self.selected_candidate is not None:
            raise ValueError(f"{self.pair_id}: failed record cannot carry a selected candidate")

    def to_dict(self) -> dict:
        d = {
            "pair_id": self.pair_id,
            "record_id": self.record_id,
            "object_label": self.object_label,
            "mask_ref": self.mask_ref,
            "target_image_ref": self.target_image_ref,
            "stage_flags": self.stage_flags,
            "scores": self.scores,
        }
        for key in ("annotation_id", "dilated_mask_ref", "fail_reason", "selected_candidate", "source_image_ref", "seed"):
            value = getattr(self, key)
            if value is not None:
                d[key] = value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EditPairRecord":
        return cls(
            pair_id=d["pair_id"],
            record_id=d["record_id"],
            object_label=d["object_label"],
            mask_ref=d["mask_ref"],
            target_image_ref=d["target_image_ref"],
            annotation_id=d.get("annotation_id"),
            dilated_mask_ref=d.get("dilated_mask_ref"),
            stage_flags=dict(d.get("stage_flags", {})),
            scores=dict(d.get("scores", {})),
            fail_reason=d.get("fail_reason"),
            selected_candidate=d.get("selected_candidate"),
            source_image_ref=d.get("source_image_ref"),
            seed=d.get("seed"),
        )


@dataclass(frozen=True)
class FunnelStats:
    """Ordered per-stage survival counts."""

    stages: tuple[tuple[str, int], ...]

    def __post_init__(self):
        counts = [c for _, c in self.stages]
        if any(c < 0 for c in counts):
            raise ManifestError("funnel counts must be non-negative")
        for (prev_name, prev), (name, cur) in zip(self.stages, self.stages[1:]):
            if cur > prev:
                raise ManifestError(
                    f"funnel count for '{name}' ({cur}) exceeds '{prev_name}' ({prev}); counts must be non-increasing"
                )

    def appended(self, stage_name: str, count: int) -> "FunnelStats":
        return FunnelStats(self.stages + ((stage_name, count),))

    def count(self, stage_name: str) -> int | None:
        for name, c in self.stages:
            if name == stage_name:
                return c
        return None

    def last(self) -> tuple[str, int] | None:
        return self.stages[-1] if self.stages else None

    def to_list(self) -> list:
        return [[name, count] for name, count in self.stages]

    @classmethod
    def from_list(cls, rows: list) -> "FunnelStats":
        return cls(tuple((str(name), int(count)) for name, count in rows))


@dataclass
class ManifestEntry:
    """One finished dataset row: an edit pair plus its instructions."""

    pair_id: str
    source_image_ref: str
    target_image_ref: str
    mask_ref: str
    object_label: str
    instructions: list[Instruction]
    scores: dict = field(default_factory=dict)
    seed: int | None = None

    def to_dict(self) -> dict:
        d = {
            "pair_id": self.pair_id,
            "source_image_ref": self.source_image_ref,
            "target_image_ref": self.target_image_ref,
            "mask_ref": self.mask_ref,
            "object_label": self.object_label,
            "instructions": [i.to_dict() for i in self.instructions],
            "scores": self.scores,
        }
        if self.seed is not None:
            d["seed"] = self.seed
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestEntry":
        return cls(
            pair_id=d["pair_id"],
            source_image_ref=d["source_image_ref"],
            target_image_ref=d["target_image_ref"],
            mask_ref=d["mask_ref"],
            object_label=d["object_label"],
            instructions=[Instruction.from_dict(i) for i in d["instructions"]],
            scores=dict(d.get("scores", {})),
            seed=d.get("seed"),
        )


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    funnel: FunnelStats
    config_digest: str
    stage_detail: dict = field(default_factory=dict)
    kind_counts: dict = field(default_factory=dict)

    def validate(self) -> None:
        seen = set()
        for entry in self.entries:
            if entry.pair_id in seen:
                raise ManifestError(f"duplicate pair_id '{entry.pair_id}'")
            seen.add(entry.pair_id)
            if not entry.instructions:
                raise ManifestError(f"entry '{entry.pair_id}' has no instructions")
