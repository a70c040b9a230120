import json

import pytest
from fastapi.testclient import TestClient

from addpipe.pipeline import Workspace
from addpipe.service import build_app


@pytest.fixture()
def client(pipeline_workspace, tmp_path):
    """Service over a copy of the shared workspace (annotation log stays local)."""
    import shutil

    workspace, _ = pipeline_workspace
    root = tmp_path / "ws"
    shutil.copytree(workspace.root, root)
    app = build_app(root)
    return TestClient(app)


class TestCandidatesEndpoint:
    def test_paging(self, client):
        first = client.get("/api/candidates", params={"offset": 0, "limit": 5}).json()
        assert first["total"] > 5
        assert len(first["items"]) == 5
        second = client.get("/api/candidates", params={"offset": 5, "limit": 5}).json()
        assert first["items"][0]["pair_id"] != second["items"][0]["pair_id"] or (
            first["items"][0]["candidate_index"] != second["items"][0]["candidate_index"]
        )

    def test_items_carry_refs_and_scores(self, client):
        item = client.get("/api/candidates", params={"limit": 1}).json()["items"][0]
        for key in ("pair_id", "candidate_index", "image_ref", "original_ref", "mask_ref"):
            assert item[key] is not None
        assert item["scores"]["consensus"] is not None

    def test_image_endpoint_serves_refs(self, client):
        item = client.get("/api/candidates", params={"limit": 1}).json()["items"][0]
        response = client.get(f"/api/images/{item['image_ref']}")
        assert response.status_code == 200
        assert response.headers["content-type"] == "image/png"
        assert response.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_image_endpoint_rejects_traversal(self, client):
        assert client.get("/api/images/../../etc/passwd").status_code == 404


class TestAnnotationFlow:
    def test_post_persists_and_replays(self, client, tmp_path):
        items = client.get("/api/candidates", params={"limit": 10}).json()["items"]
        for item in items:
            response = client.post(
                "/api/annotations",
                json={
                    "pair_id": item["pair_id"],
                    "candidate_index": item["candidate_index"],
                    "label": "success",
                    "annotator_id": "tester",
                },
            )
            assert response.status_code == 200
        log = tmp_path / "ws" / "annotations.log"
        lines = [json.loads(line) for line in log.read_text().splitlines()]
        assert len(lines) == 10
        meta = client.get("/api/meta").json()
        assert meta["annotation_count"] == 10
        assert meta["last_seq"] == 10

    def test_unknown_candidate_400(self, client):
        response = client.post(
            "/api/annotations",
            json={"pair_id": "nope", "candidate_index": 0, "label": "success", "annotator_id": "t"},
        )
        assert response.status_code == 400

    def test_relabel_updates_effective(self, client):
        item = client.get("/api/candidates", params={"limit": 1}).json()["items"][0]
        body = {"pair_id": item["pair_id"], "candidate_index": item["candidate_index"], "annotator_id": "t"}
        client.post("/api/annotations", json=dict(body, label="success"))
        client.post("/api/annotations", json=dict(body, label="failure"))
        refreshed = client.get("/api/candidates", params={"limit": 1, "annotator_id": "t"}).json()["items"][0]
        assert refreshed["effective_label"] == "failure"
        assert refreshed["my_label"] == "failure"


class TestSweepEndpoints:
    def _annotate(self, client, n=12):
        items = client.get("/api/candidates", params={"limit": n}).json()["items"]
        for index, item in enumerate(items):
            client.post(
                "/api/annotations",
                json={
                    "pair_id": item["pair_id"],
                    "candidate_index": item["candidate_index"],
                    "label": "success" if index % 2 == 0 else "failure",
                    "annotator_id": "t",
                },
            )

    def test_sweep_empty_without_annotations(self, client):
        data = client.get("/api/sweep", params={"filter": "consensus"}).json()
        assert data["points"] == []
        assert data["annotation_count"] == 0

    def test_sweep_returns_curve(self, client):
        self._annotate(client)
        data = client.get("/api/sweep", params={"filter": "consensus"}).json()
        assert data["orientation"] == "filter-high"
        assert data["annotation_count"] == 12
        assert len(data["points"]) >= 3
        filtered = [p["filtered_pct"] for p in data["points"]]
        assert all(0.0 <= f <= 100.0 for f in filtered)

    def test_sweep_matches_library_computation(self, client, tmp_path):
        from addpipe.calibration import FILTER_ORIENTATION, AnnotationStore, sweep_threshold

        self._annotate(client)
        data = client.get("/api/sweep", params={"filter": "mm_clip"}).json()
        assert data["points"], "sweep should produce points"

        # recompute directly from the workspace files
        root = tmp_path / "ws"
        rows = [json.loads(line) for line in (root / "candidates_scored.jsonl").read_text().splitlines()]
        scores = {
            (r["pair_id"], r["candidate_index"]): float(r["mm_post"]) for r in rows if r.get("mm_post") is not None
        }
        store = AnnotationStore(root / "annotations.log")
        labels = {k: v for k, v in store.effective_labels().items() if k in scores}
        grid = [p["threshold"] for p in data["points"]]
        expected = sweep_threshold(labels, scores, grid, FILTER_ORIENTATION["mm_clip"])
        produced = [(p["threshold"], p["filtered_pct"], p["success_pct_retained"]) for p in data["points"]]
        assert produced == [(p.threshold, p.filtered_pct, p.success_pct_retained) for p in expected]

    def test_unknown_filter_400(self, client):
        assert client.get("/api/sweep", params={"filter": "sharpness"}).status_code == 400

    def test_suggest_needs_enough_points(self, client):
        self._annotate(client, n=4)
        response = client.get("/api/suggest", params={"filter": "consensus"})
        assert response.status_code in (200, 400)


class TestThresholdPersistence:
    def test_put_merges_and_is_idempotent(self, client, tmp_path):
        body = {"suggestions": {"consensus": 0.0625, "mm_clip": 0.21}}
        first = client.put("/api/thresholds", json=body)
        assert first.status_code == 200
        config_path = tmp_path / "ws" / "config.yaml"
        once = config_path.read_text()
        second = client.put("/api/thresholds", json=body)
        assert second.status_code == 200
        assert config_path.read_text() == once
        merged = second.json()["config"]
        assert merged["post_removal"]["consensus_threshold"] == 0.0625
        assert merged["post_removal"]["mm_threshold"] == 0.21

    def test_unknown_filter_rejected(self, client):
        response = client.put("/api/thresholds", json={"suggestions": {"blur": 1.0}})
        assert response.status_code == 400


class TestAuth:
    def test_token_required_when_configured(self, pipeline_workspace, tmp_path):
        import shutil

        workspace, _ = pipeline_workspace
        root = tmp_path / "ws-auth"
        shutil.copytree(workspace.root, root)
        client = TestClient(build_app(root, token="sesame"))
        assert client.get("/api/meta").status_code == 401
        ok = client.get("/api/meta", headers={"Authorization": "Bearer sesame"})
        assert ok.status_code == 200
