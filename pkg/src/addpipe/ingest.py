"""Corpus adapters: COCO-style annotation ingestion and reference-text files."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IngestionError
from .rasters import decode_rle, rasterize_polygons
from .records import ImageRecord, MaskAnnotation


@dataclass
class IngestResult:
    image_records: list[ImageRecord]
    mask_annotations: list[MaskAnnotation]
    warnings: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter((self.image_records, self.mask_annotations))


def _decode_segmentation(segmentation, height: int, width: int):
    if isinstance(segmentation, list):
        return rasterize_polygons(segmentation, height, width)
    if isinstance(segmentation, dict):
        counts = segmentation.get("counts")
        if isinstance(counts, list):
            h, w = segmentation.get("size", (height, width))
            return decode_rle(counts, int(h), int(w))
        raise IngestionError("compressed RLE masks are not supported; decode to polygon or uncompressed counts first")
    raise IngestionError(f"unsupported segmentation payload of type {type(segmentation).__name__}")


def ingest_coco_style(annotation_file, image_dir, source_tag: str = "coco", dedup: bool = False) -> IngestResult:
    """Parse a COCO-style annotation file into image records and binary mask annotations.

    Annotations referencing a missing image (by id or on disk) are skipped and
    reported in the result's warnings. With ``dedup`` set, byte-identical masks
    for the same (image, label) are collapsed to the first occurrence.
    """
    annotation_file = Path(annotation_file)
    image_dir = Path(image_dir)
    try:
        payload = json.loads(annotation_file.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestionError(f"cannot read annotation file {annotation_file}: {exc}") from exc

    for key in ("images", "annotations", "categories"):
        if key not in payload:
            raise IngestionError(f"annotation file lacks required section '{key}'")

    categories = {c["id"]: c["name"] for c in payload["categories"]}
    warnings: list[str] = []

    images: dict = {}
    for info in payload["images"]:
        image_path = image_dir / info["file_name"]
        if not image_path.exists():
            warnings.append(f"image file missing: {info['file_name']}")
            continue
        record = ImageRecord(
            record_id=str(info["id"]),
            image_ref=str(image_path),
            width=int(info["width"]),
            height=int(info["height"]),
            source_tag=source_tag,
        )
        images[info["id"]] = record

    masks: list[MaskAnnotation] = []
    used_record_ids = set()
    seen_signatures = set()
    for ann in payload["annotations"]:
        image = images.get(ann["image_id"])
        if image is None:
            warnings.append(f"annotation {ann.get('id')} references missing image {ann['image_id']}")
            continue
        label = categories.get(ann["category_id"])
        if label is None:
            warnings.append(f"annotation {ann.get('id')} references unknown category {ann['category_id']}")
            continue
        mask = _decode_segmentation(ann["segmentation"], image.height, image.width)
        if dedup:
            signature = (image.record_id, label, hashlib.sha256(mask.tobytes()).hexdigest())
            if signature in seen_signatures:
                continue
            seen_signatures.add(signature)
        masks.append(MaskAnnotation.from_mask(image.record_id, ann["id"], label, mask))
        used_record_ids.add(image.record_id)

    records = [r for r in images.values() if r.record_id in used_record_ids]
    return IngestResult(records, masks, warnings)


def read_reference_file(path) -> dict[str, list[str]]:
    """Read a reference-text file mapping annotation ids to object references.

    Accepts a JSON list of ``{"ann_id": ..., "ref_text": "..."}`` rows
    (``"refs": [...]`` for several texts per annotation).
    """
    try:
        rows = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestionError(f"cannot read reference file {path}: {exc}") from exc
    if not isinstance(rows, list):
        raise IngestionError("reference file must be a JSON list")
    refs: dict[str, list[str]] = {}
    for row in rows:
        ann_id = str(row["ann_id"])
        texts = row.get("refs", [row["ref_text"]] if "ref_text" in row else [])
        for text in texts:
            if text:
                refs.setdefault(ann_id, []).append(str(text))
    return refs
