"""Metric harness: pixel distances, embedding similarities, CMMD, directional similarity,
guidance trade-off sweeps, and the object-addition instruction filter."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .records import EmbeddingVector, cosine


def _as_unit_pixels(a: np.ndarray) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.size and (arr.min() < -1e-9 or arr.max() > 1.0 + 1e-9):
        raise ValueError("pixel metrics expect [0, 1]-normalized inputs")
    return arr


def normalize_pixels(image: np.ndarray) -> np.ndarray:
    """uint8 raster -> [0, 1] float."""
    return np.asarray(image, dtype=np.float64) / 255.0


def pixel_l1(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _as_unit_pixels(a), _as_unit_pixels(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))


def pixel_l2(a: np.ndarray, b: np.ndarray) -> float:
    a, b = _as_unit_pixels(a), _as_unit_pixels(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def embedding_similarity(a_img: np.ndarray, b_img: np.ndarray, embedder) -> float:
    """Cosine similarity of two image embeddings (CLIP-I / DINO-I depending on the handle)."""
    return cosine(embedder.embed_image(a_img), embedder.embed_image(b_img))


def clip_t(edited_image: np.ndarray, target_caption: str, embedder) -> float:
    if not target_caption:
        raise ValueError("target caption must be non-empty")
    return cosine(embedder.embed_image(edited_image), embedder.embed_text(target_caption))


def directional_similarity(
    src_img: np.ndarray, tgt_img: np.ndarray, src_caption: str, tgt_caption: str, embedder
) -> float:
    """Cosine between the image-embedding change and the caption-embedding change."""
    if not src_caption or not tgt_caption:
        raise ValueError("captions must be non-empty")
    d_img = embedder.embed_image(tgt_img).values - embedder.embed_image(src_img).values
    d_txt = embedder.embed_text(tgt_caption).values - embedder.embed_text(src_caption).values
    n_img, n_txt = float(np.linalg.norm(d_img)), float(np.linalg.norm(d_txt))
    if n_img == 0.0 or n_txt == 0.0:
        raise ValueError("undefined direction: zero difference vector")
    return float(np.dot(d_img, d_txt) / (n_img * n_txt))


def _embedding_matrix(vectors: list[EmbeddingVector]) -> np.ndarray:
    if not vectors:
        raise ValueError("embedding set must be non-empty")
    dims = {v.dimension for v in vectors}
    if len(dims) != 1:
        raise ValueError(f"embedding dimensions differ: {sorted(dims)}")
    return np.stack([v.values for v in vectors])


def cmmd(
    set_a: list[EmbeddingVector],
    set_b: list[EmbeddingVector],
    bandwidth: float = 10.0,
    scale: float = 1000.0,
) -> float:
    """Squared MMD between two embedding sets under a Gaussian kernel.

    All-pairs (V-statistic) means including diagonals, so identical sets give
    exactly zero. k(x, y) = exp(-||x - y||^2 / (2 sigma^2)), sigma = bandwidth.
    """
    a = _embedding_matrix(set_a)
    b = _embedding_matrix(set_b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    denom = 2.0 * bandwidth**2

    def kernel_mean(x: np.ndarray, y: np.ndarray) -> float:
        sq = np.sum(x**2, axis=1)[:, None] + np.sum(y**2, axis=1)[None, :] - 2.0 * (x @ y.T)
        return float(np.mean(np.exp(-np.maximum(sq, 0.0) / denom)))

    return scale * (kernel_mean(a, a) + kernel_mean(b, b) - 2.0 * kernel_mean(a, b))


_TOKEN_SPLIT = re.compile(r"[^a-z]+")


def magicbrush_add_filter(instruction_text: str) -> bool:
    """Keep object-addition instructions: has "add"/"put", lacks "remove" and "and" (token-level)."""
    tokens = set(_TOKEN_SPLIT.split(instruction_text.lower()))
    if not ({"add", "put"} & tokens):
        return False
    if "remove" in tokens or "and" in tokens:
        return False
    return True


@dataclass
class TradeoffPoint:
    s_image: float
    clip_image_similarity: float
    directional_similarity: float


def tradeoff_sweep(
    editor,
    eval_set: list[dict],
    embedder,
    s_text_fixed: float = 7.0,
    s_image_values=(1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5),
) -> list[TradeoffPoint]:
    """Consistency-vs-adherence curve: one point per image-guidance scale.

    eval_set entries carry ``source_image``, ``instruction``, ``src_caption``,
    ``tgt_caption``. ``editor(source_image, instruction, s_text, s_image)``
    returns the edited image.
    """
    if not eval_set:
        raise ValueError("eval set must be non-empty")
    points = []
    for s_image in s_image_values:
        sims = []
        dirs = []
        for entry in eval_set:
            edited = editor(entry["source_image"], entry["instruction"], s_text_fixed, s_image)
            sims.append(embedding_similarity(edited, entry["source_image"], embedder))
            try:
                dirs.append(
                    directional_similarity(
                        entry["source_image"], edited, entry["src_caption"], entry["tgt_caption"], embedder
                    )
                )
            except ValueError:
                # a no-op edit has no direction; count it as zero adherence
                dirs.append(0.0)
        points.append(TradeoffPoint(float(s_image), float(np.mean(sims)), float(np.mean(dirs))))
    return points


@dataclass
class MetricRow:
    pair_id: str
    values: dict = field(default_factory=dict)
    error: str | None = None


@dataclass
class MetricTable:
    rows: list[MetricRow]
    aggregates: dict = field(default_factory=dict)
    cmmd_value: float | None = None


PAIR_METRICS = ("l1", "l2", "clip_i", "clip_t")


def evaluate_pairs(
    outputs: dict[str, np.ndarray],
    references: dict[str, np.ndarray],
    embedder,
    metrics: tuple = PAIR_METRICS,
    captions: dict[str, str] | None = None,
    cmmd_bandwidth: float = 10.0,
    cmmd_scale: float = 1000.0,
    with_cmmd: bool = True,
) -> MetricTable:
    """Per-pair metric rows plus aggregate means; CMMD once over the aligned sets.

    Pairs missing a reference are recorded as row-level errors; aggregates run
    over the intersection only.
    """
    rows = []
    aligned_out = []
    aligned_ref = []
    for pair_id in sorted(outputs):
        if pair_id not in references:
            rows.append(MetricRow(pair_id=pair_id, error="missing_reference"))
            continue
        out_img, ref_img = outputs[pair_id], references[pair_id]
        values = {}
        if "l1" in metrics:
            values["l1"] = pixel_l1(normalize_pixels(out_img), normalize_pixels(ref_img))
        if "l2" in metrics:
            values["l2"] = pixel_l2(normalize_pixels(out_img), normalize_pixels(ref_img))
        if "clip_i" in metrics:
            values["clip_i"] = embedding_similarity(out_img, ref_img, embedder)
        if "clip_t" in metrics and captions and pair_id in captions:
            values["clip_t"] = clip_t(out_img, captions[pair_id], embedder)
        rows.append(MetricRow(pair_id=pair_id, values=values))
        aligned_out.append(out_img)
        aligned_ref.append(ref_img)

    if not aligned_out:
        raise ValueError("no output/reference pairs align; nothing to evaluate")

    aggregates: dict[str, float] = {}
    for metric in metrics:
        observed = [r.values[metric] for r in rows if r.error is None and metric in r.values]
        if observed:
            aggregates[metric] = float(np.mean(observed))

    cmmd_value = None
    if with_cmmd:
        out_emb = [embedder.embed_image(img) for img in aligned_out]
        ref_emb = [embedder.embed_image(img) for img in aligned_ref]
        cmmd_value = cmmd(out_emb, ref_emb, bandwidth=cmmd_bandwidth, scale=cmmd_scale)
        aggregates["cmmd"] = cmmd_value

    return MetricTable(rows=rows, aggregates=aggregates, cmmd_value=cmmd_value)
