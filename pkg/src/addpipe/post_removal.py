"""Removal verification and refinement: consensus, multimodal gate, blending, importance.

Applied in a fixed, short-circuiting order per record:
consensus -> per-candidate multimodal filter -> selection -> alpha-blend -> importance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import PostRemovalConfig, PreRemovalConfig, feather_sigma_for
from .errors import EmptyRegionError
from .pre_removal import dilation_radius, object_text_prompt
from .rasters import blend_with_weights, composite_on_mean_background, feathered_weights
from .records import FAIL, PASS, EmbeddingVector, cosine

POSTFILTER_SUBSTAGES = ("consensus", "mm_clip", "importance")


@dataclass(frozen=True)
class ConsensusResult:
    value: float
    passed: bool


@dataclass(frozen=True)
class MMClipResult:
    pre_score: float
    post_score: float
    passed: bool

    @property
    def shift(self) -> float:
        return self.pre_score - self.post_score


@dataclass(frozen=True)
class Rejection:
    reason: str


def masked_region_embedding(
    image: np.ndarray,
    mask: np.ndarray,
    embedder,
    feather_sigma: float,
    dilate_radius: int | None = None,
    dilation_cfg=None,
    element: str = "square",
) -> EmbeddingVector:
    """Embed the masked region against a mean-color background.

    The soft weight map comes from dilating the mask (area-based radius rule
    when ``dilate_radius`` is None) and Gaussian-blurring with ``feather_sigma``.
    """
    if mask.shape != image.shape[:2]:
        raise ValueError(f"mask shape {mask.shape} does not match image {image.shape[:2]}")
    if not mask.any():
        raise EmptyRegionError("masked region is empty")
    if dilate_radius is None:
        dilate_radius = dilation_radius(mask, dilation_cfg or PreRemovalConfig().dilation)
    composite = composite_on_mean_background(image, mask, feather_sigma, dilate_radius, element)
    vector = embedder.embed_image(composite)
    return vector if vector.normalized else vector.unit()


def clip_consensus(candidate_embeddings: list[EmbeddingVector], threshold: float) -> ConsensusResult:
    """Mean over dimensions of the per-dimension population std across candidates.

    Zero iff all embeddings are identical; permutation-invariant.
    """
    if len(candidate_embeddings) < 2:
        raise ValueError("consensus needs at least 2 candidate embeddings")
    dims = {e.dimension for e in candidate_embeddings}
    if len(dims) != 1:
        raise ValueError(f"embedding dimensions differ: {sorted(dims)}")
    stack = np.stack([e.values for e in candidate_embeddings])
    value = float(stack.std(axis=0, ddof=0).mean())
    return ConsensusResult(value=value, passed=value <= threshold)


def multimodal_filter(
    original_image: np.ndarray,
    candidate_image: np.ndarray,
    mask: np.ndarray,
    object_label: str,
    embedder,
    cfg: PostRemovalConfig,
    feather_sigma: float | None = None,
    dilate_radius: int | None = None,
) -> MMClipResult:
    """Similarity of the (feathered) masked region to the class name, before and after removal.

    Passes when the post score drops below the threshold, or when a large
    similarity shift rescues a candidate whose absolute score stays high.
    """
    if candidate_image.shape != original_image.shape:
        raise ValueError("candidate dimensions differ from the original image")
    if dilate_radius is None:
        dilate_radius = dilation_radius(mask, PreRemovalConfig().dilation)
    if feather_sigma is None:
        feather_sigma = feather_sigma_for(dilate_radius, cfg.feather_sigma_rule)
    text = embedder.embed_text(object_text_prompt(object_label))
    pre = cosine(masked_region_embedding(original_image, mask, embedder, feather_sigma, dilate_radius), text)
    post = cosine(masked_region_embedding(candidate_image, mask, embedder, feather_sigma, dilate_radius), text)
    shift = pre - post
    passed = (post <= cfg.mm_threshold) or (shift >= cfg.shift_delta)
    return MMClipResult(pre_score=pre, post_score=post, passed=passed)


def select_candidate(results: list[MMClipResult]) -> int | Rejection:
    """Lowest post-removal score among passing candidates; ties to the lowest index."""
    best_index: int | None = None
    best_score = float("inf")
    for index, result in enumerate(results):
        if result.passed and result.post_score < best_score:
            best_index = index
            best_score = result.post_score
    if best_index is None:
        return Rejection("mm_clip")
    return best_index


def alpha_blend(
    source_original: np.ndarray,
    inpainted: np.ndarray,
    mask: np.ndarray,
    feather_sigma: float,
    dilate_radius: int | None = None,
    element: str = "square",
) -> np.ndarray:
    """Confine changes to the feathered mask region; zero-weight pixels copy the source bit-for-bit."""
    if dilate_radius is None:
        dilate_radius = dilation_radius(mask, PreRemovalConfig().dilation) if mask.any() else 0
    weights = feathered_weights(mask, feather_sigma, dilate_radius, element)
    return blend_with_weights(source_original, inpainted, weights)


def importance_filter(source_blended: np.ndarray, target_original: np.ndarray, embedder, importance_threshold: float):
    """Drop pairs whose whole-image embeddings are nearly identical (marginal object)."""
    sim = cosine(embedder.embed_image(source_blended), embedder.embed_image(target_original))
    from .pre_removal import FilterDecision

    if sim > importance_threshold:
        return FilterDecision.fail("marginal_object"), sim
    return FilterDecision.ok(), sim


def run_post_removal(
    record,
    candidates,
    original_image: np.ndarray,
    mask: np.ndarray,
    backends,
    cfg: PostRemovalConfig,
    dilation_cfg=None,
    candidate_images: list[np.ndarray] | None = None,
):
    """Apply the post-removal stages in order, populating flags and scores.

    On the first failing stage, downstream stage flags stay pending. Returns
    (record, blended_image_or_None, per_candidate_mm_results).
    """
    if candidate_images is None:
        candidate_images = [c.image for c in candidates]
    radius = dilation_radius(mask, dilation_cfg or PreRemovalConfig().dilation)
    sigma = feather_sigma_for(radius, cfg.feather_sigma_rule)

    embeddings = []
    for image in candidate_images:
        embeddings.append(masked_region_embedding(image, mask, backends.embedder, sigma, radius))
    for candidate, embedding in zip(candidates, embeddings):
        candidate.region_embedding = embedding

    consensus = clip_consensus(embeddings, cfg.consensus_threshold)
    record.scores["consensus"] = consensus.value
    if not consensus.passed:
        record.mark("consensus", FAIL, "consensus")
        return record, None, []
    record.mark("consensus", PASS)

    mm_results = []
    for candidate, image in zip(candidates, candidate_images):
        result = multimodal_filter(
            original_image, image, mask, record.object_label, backends.embedder, cfg,
            feather_sigma=sigma, dilate_radius=radius,
        )
        candidate.mm_clip_score = result.post_score
        mm_results.append(result)
    record.scores["mm_clip_pre"] = mm_results[0].pre_score
    selection = select_candidate(mm_results)
    if isinstance(selection, Rejection):
        record.mark("mm_clip", FAIL, selection.reason)
        return record, None, mm_results
    record.mark("mm_clip", PASS)
    record.selected_candidate = selection
    record.scores["mm_clip_post"] = mm_results[selection].post_score
    record.seed = candidates[selection].seed

    blended = alpha_blend(original_image, candidate_images[selection], mask, sigma, radius)

    decision, sim = importance_filter(blended, original_image, backends.embedder, cfg.importance_threshold)
    record.scores["importance"] = sim
    if not decision.passed:
        record.mark("importance", FAIL, decision.reason)
        return record, None, mm_results
    record.mark("importance", PASS)
    return record, blended, mm_results
