import json

import numpy as np
import pytest

from addpipe.errors import IngestionError
from addpipe.ingest import ingest_coco_style, read_reference_file
from addpipe.rasters import decode_rle, rasterize_polygons, save_png


def pnpoly_mask(polygon: list[float], height: int, width: int) -> np.ndarray:
    """Independent oracle: per-pixel even-odd ray cast at pixel centers."""
    xs = polygon[0::2]
    ys = polygon[1::2]
    n = len(xs)
    mask = np.zeros((height, width), dtype=np.uint8)
    for row in range(height):
        py = row + 0.5
        for col in range(width):
            px = col + 0.5
            inside = False
            for i in range(n):
                x0, y0 = xs[i], ys[i]
                x1, y1 = xs[(i + 1) % n], ys[(i + 1) % n]
                if (y0 > py) != (y1 > py):
                    crossing = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
                    if px < crossing:
                        inside = not inside
            if inside:
                mask[row, col] = 255
    return mask


# Generic-position polygons: no pixel center falls on an edge, so the scanline
# rasterizer and the ray-cast oracle must agree exactly.
FIXTURE_POLYGONS = [
    [10.2, 10.2, 20.2, 10.2, 20.2, 18.2, 10.2, 18.2],           # rectangle
    [5.2, 3.3, 25.2, 7.3, 9.2, 19.3],                           # triangle
    [16.2, 2.3, 27.2, 12.3, 16.2, 22.3, 5.2, 12.3],             # diamond
    [3.2, 3.3, 19.2, 3.3, 19.2, 9.3, 11.2, 9.3, 11.2, 17.3, 3.2, 17.3],  # L-shape
]


class TestPolygonRasterization:
    @pytest.mark.parametrize("polygon", FIXTURE_POLYGONS)
    def test_matches_ray_cast_oracle(self, polygon):
        produced = rasterize_polygons([polygon], 32, 32)
        expected = pnpoly_mask(polygon, 32, 32)
        assert np.array_equal(produced, expected)
        assert produced.sum() > 0

    def test_multiple_polygons_or_combined(self):
        a, b = FIXTURE_POLYGONS[0], FIXTURE_POLYGONS[1]
        combined = rasterize_polygons([a, b], 32, 32)
        separate = rasterize_polygons([a], 32, 32) | rasterize_polygons([b], 32, 32)
        assert np.array_equal(combined, separate)

    def test_degenerate_polygon_ignored(self):
        assert rasterize_polygons([[1.0, 1.0, 2.0, 2.0]], 8, 8).sum() == 0


class TestRleDecoding:
    def test_column_major_runs(self):
        # 2x2 mask, column-major: off 1, on 2, off 1 -> pixels (1,0) and (0,1)
        mask = decode_rle([1, 2, 1], 2, 2)
        expected = np.array([[0, 255], [255, 0]], dtype=np.uint8)
        assert np.array_equal(mask, expected)

    def test_bad_total_rejected(self):
        with pytest.raises(IngestionError):
            decode_rle([1, 2], 2, 2)


def write_corpus(tmp_path, images, annotations, categories):
    annotation_file = tmp_path / "ann.json"
    annotation_file.write_text(json.dumps({
        "images": images, "annotations": annotations, "categories": categories,
    }))
    return annotation_file


class TestCocoIngestion:
    def test_empty_corpus(self, tmp_path):
        annotation_file = write_corpus(tmp_path, [], [], [{"id": 1, "name": "cat"}])
        records, masks = ingest_coco_style(annotation_file, tmp_path)
        assert records == [] and masks == []

    def test_count_conservation_one_image_two_annotations(self, tmp_path):
        img = np.zeros((32, 32, 3), dtype=np.uint8)
        save_png(img, tmp_path / "one.png")
        annotation_file = write_corpus(
            tmp_path,
            [{"id": 1, "file_name": "one.png", "width": 32, "height": 32}],
            [
                {"id": 10, "image_id": 1, "category_id": 1, "segmentation": [FIXTURE_POLYGONS[0]]},
                {"id": 11, "image_id": 1, "category_id": 1, "segmentation": [FIXTURE_POLYGONS[1]]},
            ],
            [{"id": 1, "name": "cat"}],
        )
        records, masks = ingest_coco_style(annotation_file, tmp_path)
        assert len(records) == 1
        assert len(masks) == 2

    def test_area_matches_oracle_on_four_image_fixture(self, tmp_path):
        images, annotations = [], []
        for i, polygon in enumerate(FIXTURE_POLYGONS):
            name = f"img{i}.png"
            save_png(np.zeros((32, 32, 3), dtype=np.uint8), tmp_path / name)
            images.append({"id": i, "file_name": name, "width": 32, "height": 32})
            annotations.append({"id": 100 + i, "image_id": i, "category_id": 1, "segmentation": [polygon]})
        annotation_file = write_corpus(tmp_path, images, annotations, [{"id": 1, "name": "cat"}])
        _, masks = ingest_coco_style(annotation_file, tmp_path)
        assert len(masks) == 4
        for mask_ann, polygon in zip(sorted(masks, key=lambda m: m.annotation_id), FIXTURE_POLYGONS):
            oracle = pnpoly_mask(polygon, 32, 32)
            assert mask_ann.area_px == int(np.count_nonzero(oracle))

    def test_missing_image_skipped_with_warning(self, tmp_path):
        save_png(np.zeros((16, 16, 3), dtype=np.uint8), tmp_path / "here.png")
        annotation_file = write_corpus(
            tmp_path,
            [
                {"id": 1, "file_name": "here.png", "width": 16, "height": 16},
                {"id": 2, "file_name": "gone.png", "width": 16, "height": 16},
            ],
            [
                {"id": 10, "image_id": 1, "category_id": 1, "segmentation": [[1.2, 1.2, 9.2, 1.2, 9.2, 9.2]]},
                {"id": 11, "image_id": 2, "category_id": 1, "segmentation": [[1.2, 1.2, 9.2, 1.2, 9.2, 9.2]]},
                {"id": 12, "image_id": 99, "category_id": 1, "segmentation": [[1.2, 1.2, 9.2, 1.2, 9.2, 9.2]]},
            ],
            [{"id": 1, "name": "cat"}],
        )
        result = ingest_coco_style(annotation_file, tmp_path)
        assert len(result.mask_annotations) == 1
        # one for the missing file, one per annotation that lost its image
        assert len(result.warnings) == 3

    def test_unreadable_file_raises(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        with pytest.raises(IngestionError):
            ingest_coco_style(bad, tmp_path)

    def test_dedup_flag_collapses_identical_masks(self, tmp_path):
        save_png(np.zeros((32, 32, 3), dtype=np.uint8), tmp_path / "one.png")
        ann = {"image_id": 1, "category_id": 1, "segmentation": [FIXTURE_POLYGONS[0]]}
        annotation_file = write_corpus(
            tmp_path,
            [{"id": 1, "file_name": "one.png", "width": 32, "height": 32}],
            [dict(ann, id=10), dict(ann, id=11)],
            [{"id": 1, "name": "cat"}],
        )
        assert len(ingest_coco_style(annotation_file, tmp_path).mask_annotations) == 2
        assert len(ingest_coco_style(annotation_file, tmp_path, dedup=True).mask_annotations) == 1


class TestReferenceFile:
    def test_reads_ref_text_rows(self, tmp_path):
        path = tmp_path / "refs.json"
        path.write_text(json.dumps([
            {"ann_id": 10, "ref_text": "red cat on the left"},
            {"ann_id": 10, "ref_text": "sleepy cat"},
            {"ann_id": 11, "refs": ["tall dog", "dog by the door"]},
        ]))
        refs = read_reference_file(path)
        assert refs["10"] == ["red cat on the left", "sleepy cat"]
        assert refs["11"] == ["tall dog", "dog by the door"]

    def test_non_list_rejected(self, tmp_path):
        path = tmp_path / "refs.json"
        path.write_text("{}")
        with pytest.raises(IngestionError):
            read_reference_file(path)
