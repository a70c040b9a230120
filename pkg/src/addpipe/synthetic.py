"""Synthetic fixture corpus: small images with polygon-annotated objects.

Used by the test suite and the CLI quickstart; produces a COCO-style
annotation file, matching PNGs, and a reference-text file.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .rasters import rasterize_polygons, save_png

CLASSES = ("cat", "dog", "car", "umbrella", "apple", "chair", "bottle", "bird")

COLORS = {
    "cat": (200, 120, 40),
    "dog": (150, 100, 60),
    "car": (40, 60, 200),
    "umbrella": (220, 40, 40),
    "apple": (60, 180, 60),
    "chair": (120, 80, 160),
    "bottle": (40, 180, 200),
    "bird": (230, 200, 40),
}


def _background(rng: np.random.Generator, size: int) -> np.ndarray:
    base = rng.integers(60, 180, size=3)
    rows = np.linspace(-20, 20, size).astype(np.int64)[:, None, None]
    img = np.clip(base[None, None, :] + rows + rng.integers(-8, 9, size=(size, size, 3)), 0, 255)
    return img.astype(np.uint8)


def _rect_polygon(x0, y0, w, h):
    return [x0, y0, x0 + w, y0, x0 + w, y0 + h, x0, y0 + h]


def _diamond_polygon(cx, cy, rx, ry):
    return [cx, cy - ry, cx + rx, cy, cx, cy + ry, cx - rx, cy]


def _sample_object(rng: np.random.Generator, size: int, kind: str):
    """Polygon for one object; `kind` steers which geometry gate it should hit."""
    if kind == "too_small":
        w = h = max(1, int(0.04 * size))
        x0 = rng.integers(size // 3, size // 2)
        y0 = rng.integers(size // 3, size // 2)
        return _rect_polygon(x0, y0, w, h)
    if kind == "too_large":
        margin = max(2, int(0.1 * size))
        return _rect_polygon(margin, margin, size - 2 * margin, size - 2 * margin)
    if kind == "near_border":
        w = rng.integers(size // 6, size // 4)
        h = rng.integers(size // 6, size // 4)
        return _rect_polygon(0, rng.integers(size // 4, size // 2), w, h)
    margin = int(0.15 * size)
    w = rng.integers(int(0.15 * size), int(0.35 * size))
    h = rng.integers(int(0.15 * size), int(0.35 * size))
    x0 = rng.integers(margin, size - margin - w)
    y0 = rng.integers(margin, size - margin - h)
    if rng.random() < 0.5:
        return _rect_polygon(int(x0), int(y0), int(w), int(h))
    return _diamond_polygon(int(x0 + w // 2), int(y0 + h // 2), int(w // 2), int(h // 2))


def make_synthetic_corpus(out_dir, n: int = 200, seed: int = 0, size: int = 64) -> dict:
    """Generate n images with one polygon-annotated object each (a mix of
    geometry-passing and intentionally failing cases) plus reference texts."""
    out_dir = Path(out_dir)
    image_dir = out_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    images = []
    annotations = []
    refs = []
    kinds = ["normal"] * n
    for i in range(0, n, 10):
        kinds[i] = "too_small"
    for i in range(5, n, 20):
        kinds[i] = "too_large"
    for i in range(7, n, 15):
        kinds[i] = "near_border"

    for i in range(n):
        label = CLASSES[int(rng.integers(0, len(CLASSES)))]
        polygon = [float(v) for v in _sample_object(rng, size, kinds[i])]
        mask = rasterize_polygons([polygon], size, size)
        img = _background(rng, size)
        color = np.array(COLORS[label], dtype=np.uint8)
        img[mask > 0] = color
        file_name = f"img_{i:04d}.png"
        save_png(img, image_dir / file_name)
        images.append({"id": i, "file_name": file_name, "width": size, "height": size})
        annotations.append(
            {
                "id": 1000 + i,
                "image_id": i,
                "category_id": CLASSES.index(label),
                "segmentation": [polygon],
                "bbox": [min(polygon[0::2]), min(polygon[1::2]), 0, 0],
                "area": int(mask.sum() // 255),
            }
        )
        if rng.random() < 0.3:
            shade = ["small", "large", "bright", "dark"][int(rng.integers(0, 4))]
            refs.append({"ann_id": 1000 + i, "ref_text": f"{shade} {label} in the scene"})

    payload = {
        "images": images,
        "annotations": annotations,
        "categories": [{"id": idx, "name": name} for idx, name in enumerate(CLASSES)],
    }
    annotation_file = out_dir / "annotations.json"
    annotation_file.write_text(json.dumps(payload))
    reference_file = out_dir / "references.json"
    reference_file.write_text(json.dumps(refs))
    return {
        "annotation_file": str(annotation_file),
        "image_dir": str(image_dir),
        "reference_file": str(reference_file),
    }
