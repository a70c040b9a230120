"""Mask suitability gates applied before any inpainting: geometry, view quality, dilation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DilationConfig, PreRemovalConfig
from .rasters import dilate, mask_area
from .records import EmbeddingVector, ImageRecord, MaskAnnotation, cosine


@dataclass(frozen=True)
class FilterDecision:
    passed: bool
    reason: str | None = None

    @classmethod
    def ok(cls) -> "FilterDecision":
        return cls(True)

    @classmethod
    def fail(cls, reason: str) -> "FilterDecision":
        return cls(False, reason)


def filter_mask_geometry(mask: MaskAnnotation, image: ImageRecord, cfg: PreRemovalConfig) -> FilterDecision:
    """Reject masks too small, too large, or with set pixels near the image border."""
    if mask.mask.shape != (image.height, image.width):
        raise ValueError(
            f"mask shape {mask.mask.shape} does not match image {image.record_id} "
            f"({image.height}, {image.width})"
        )
    total = image.width * image.height
    frac = mask.area_px / total
    if frac < cfg.min_area_frac:
        return FilterDecision.fail("too_small")
    if frac > cfg.max_area_frac:
        return FilterDecision.fail("too_large")
    margin = cfg.border_margin_frac * min(image.width, image.height)
    x, y, w, h = mask.bbox
    if x < margin or y < margin or image.width - (x + w) < margin or image.height - (y + h) < margin:
        return FilterDecision.fail("near_border")
    return FilterDecision.ok()


def object_text_prompt(object_label: str) -> str:
    return f"a photo of a {object_label}"


def abnormality_score(image: np.ndarray, mask: np.ndarray, object_label: str, embedder,
                      feather_sigma: float = 0.0, dilate_radius: int = 0) -> float:
    """Cosine similarity between the masked object's embedding and its class-name prompt.

    Low values indicate abnormal views (blur, occlusion); callers filter below
    a threshold.
    """
    from .post_removal import masked_region_embedding

    region = masked_region_embedding(image, mask, embedder, feather_sigma, dilate_radius=dilate_radius)
    text = embedder.embed_text(object_text_prompt(object_label))
    return cosine(region, text)


def dilate_mask(mask: np.ndarray, radius_px: int, element: str = "square") -> np.ndarray:
    return dilate(mask, radius_px, element)


def dilation_radius(mask: np.ndarray, cfg: DilationConfig) -> int:
    """radius = clamp(round(k * sqrt(area)), r_min, r_max)."""
    raw = int(round(cfg.k * float(np.sqrt(mask_area(mask)))))
    return max(cfg.r_min, min(cfg.r_max, raw))


def abnormality_passes(score: float, cfg: PreRemovalConfig) -> bool:
    return score >= cfg.abnormality_threshold
