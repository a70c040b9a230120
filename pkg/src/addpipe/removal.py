"""Removal prompts and inpainted candidate generation."""

from __future__ import annotations

import numpy as np

from .records import RemovalCandidate

POSITIVE_REMOVAL_PROMPT = "a photo of a background, a photo of an empty place"


def build_removal_prompts(object_label: str) -> tuple[str, str]:
    """Positive/negative prompt pair steering the inpainter toward background."""
    if not object_label:
        raise ValueError("object label must be non-empty")
    return POSITIVE_REMOVAL_PROMPT, f"an object, a {object_label}"


def generate_candidates(
    image: np.ndarray,
    dilated_mask: np.ndarray,
    object_label: str,
    inpainter,
    n: int = 3,
    steps: int = 10,
    seed_base: int = 0,
    pair_id: str = "",
) -> list[RemovalCandidate]:
    """Produce n inpainted candidates with seeds seed_base + i; scores are filled later.

    Candidate images are returned attached to each RemovalCandidate via the
    ``image`` attribute; the caller persists them and fills ``image_ref``.
    """
    if n < 1:
        raise ValueError("candidate count must be >= 1")
    if dilated_mask.shape != image.shape[:2]:
        raise ValueError(f"mask shape {dilated_mask.shape} does not match image {image.shape[:2]}")
    positive, negative = build_removal_prompts(object_label)
    candidates = []
    for index in range(n):
        seed = seed_base + index
        out = inpainter.inpaint(image, dilated_mask, positive, negative, steps, seed)
        if out.shape != image.shape:
            raise ValueError(f"inpainter returned shape {out.shape}, expected {image.shape}")
        candidate = RemovalCandidate(pair_id=pair_id, candidate_index=index, image_ref="", seed=seed)
        candidate.image = out
        candidates.append(candidate)
    return candidates
