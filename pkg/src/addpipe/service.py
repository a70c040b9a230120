"""HTTP API backing the calibration UI: candidates, annotations, sweeps, thresholds.

Single-writer semantics: annotation posts run through one lock; sweep and
suggestion responses are recomputed from the live store on every request.
"""

from __future__ import annotations

import threading
from pathlib import Path

import numpy as np
from fastapi import Depends, FastAPI, HTTPException, Query, Request
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .calibration import (
    FILTER_CONFIG_KEYS,
    FILTER_ORIENTATION,
    AnnotationStore,
    SweepPoint,
    export_thresholds,
    suggest_threshold,
    sweep_threshold,
)
from .config import PipelineConfig, load_config, merge_fragment, save_config
from .errors import CalibrationError
from .pipeline import Workspace, _read_jsonl

MAX_SWEEP_POINTS = 41


class CalibrationData:
    """Scored candidate rows plus the annotation store for one workspace."""

    def __init__(self, workspace: Workspace):
        self.workspace = workspace
        self.rows = _read_jsonl(workspace.scored_candidates_path)
        self.rows.sort(key=lambda r: (r["pair_id"], r["candidate_index"]))
        keys = {(r["pair_id"], r["candidate_index"]) for r in self.rows}
        self.store = AnnotationStore(workspace.annotations_log, known_candidates=keys)
        self.lock = threading.Lock()

    def scores_for(self, filter_name: str) -> dict:
        field = {"consensus": "consensus", "mm_clip": "mm_post", "importance": "importance"}.get(filter_name)
        if field is None:
            raise CalibrationError(f"unknown filter '{filter_name}'")
        scores = {}
        for row in self.rows:
            value = row.get(field)
            if value is not None:
                scores[(row["pair_id"], row["candidate_index"])] = float(value)
        return scores

    def default_thresholds(self, filter_name: str) -> list[float]:
        values = sorted(set(self.scores_for(filter_name).values()))
        if len(values) > MAX_SWEEP_POINTS:
            quantiles = np.linspace(0.0, 1.0, MAX_SWEEP_POINTS)
            values = sorted(set(float(np.quantile(values, q)) for q in quantiles))
        return values


class AnnotationBody(BaseModel):
    pair_id: str
    candidate_index: int
    label: str
    annotator_id: str = "default"


class ThresholdsBody(BaseModel):
    suggestions: dict[str, float]


def build_app(workspace_root, ui_dist=None, token: str | None = None) -> FastAPI:
    workspace = Workspace(Path(workspace_root))
    data = CalibrationData(workspace)
    app = FastAPI(title="calibration service")

    def check_auth(request: Request):
        if token and request.headers.get("Authorization") != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    @app.get("/api/meta", dependencies=[Depends(check_auth)])
    def meta():
        labels = data.store.effective_labels()
        return {
            "candidate_count": len(data.rows),
            "annotation_count": len(labels),
            "last_seq": data.store.last_seq,
            "filters": sorted(FILTER_ORIENTATION),
        }

    @app.get("/api/candidates", dependencies=[Depends(check_auth)])
    def candidates(offset: int = Query(0, ge=0), limit: int = Query(20, ge=1, le=200), annotator_id: str = "default"):
        page = data.rows[offset : offset + limit]
        labels = data.store.effective_labels()
        items = []
        for row in page:
            key = (row["pair_id"], row["candidate_index"])
            mine = data.store.annotation_for(key, annotator_id)
            items.append(
                {
                    "pair_id": row["pair_id"],
                    "candidate_index": row["candidate_index"],
                    "image_ref": row["image_ref"],
                    "original_ref": row["original_ref"],
                    "mask_ref": row["mask_ref"],
                    "object_label": row.get("object_label", ""),
                    "scores": {
                        "consensus": row.get("consensus"),
                        "mm_pre": row.get("mm_pre"),
                        "mm_post": row.get("mm_post"),
                        "importance": row.get("importance"),
                    },
                    "effective_label": labels.get(key),
                    "my_label": mine.label if mine else None,
                }
            )
        return {"total": len(data.rows), "offset": offset, "items": items}

    @app.post("/api/annotations", dependencies=[Depends(check_auth)])
    def post_annotation(body: AnnotationBody):
        try:
            with data.lock:
                annotation = data.store.record((body.pair_id, body.candidate_index), body.label, body.annotator_id)
        except CalibrationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return annotation.to_dict()

    @app.get("/api/sweep", dependencies=[Depends(check_auth)])
    def sweep(filter: str = Query(...), thresholds: str | None = None):
        try:
            scores = data.scores_for(filter)
        except CalibrationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        labels = {k: v for k, v in data.store.effective_labels().items() if k in scores}
        if not labels:
            return JSONResponse(
                {"filter": filter, "points": [], "annotation_count": 0, "last_seq": data.store.last_seq}
            )
        if thresholds:
            grid = [float(v) for v in thresholds.split(",")]
        else:
            grid = data.default_thresholds(filter)
        points = sweep_threshold(labels, scores, grid, FILTER_ORIENTATION[filter])
        return {
            "filter": filter,
            "orientation": FILTER_ORIENTATION[filter],
            "points": [
                {"threshold": p.threshold, "filtered_pct": p.filtered_pct, "success_pct_retained": p.success_pct_retained}
                for p in points
            ],
            "annotation_count": len(labels),
            "last_seq": data.store.last_seq,
        }

    @app.get("/api/suggest", dependencies=[Depends(check_auth)])
    def suggest(filter: str = Query(...), epsilon: float = Query(0.05)):
        response = sweep(filter=filter, thresholds=None)
        if isinstance(response, JSONResponse):
            raise HTTPException(status_code=400, detail="no annotations to sweep")
        points = [
            SweepPoint(p["threshold"], p["filtered_pct"], p["success_pct_retained"]) for p in response["points"]
        ]
        try:
            result = suggest_threshold(points, epsilon=epsilon)
        except CalibrationError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"filter": filter, "threshold": result.threshold, "no_plateau": result.no_plateau}

    @app.put("/api/thresholds", dependencies=[Depends(check_auth)])
    def put_thresholds(body: ThresholdsBody):
        unknown = [name for name in body.suggestions if name not in FILTER_CONFIG_KEYS]
        if unknown:
            raise HTTPException(status_code=400, detail=f"unknown filters: {unknown}")
        fragment = export_thresholds(body.suggestions)
        with data.lock:
            config = load_config(workspace.config_path if workspace.config_path.exists() else None)
            merged = merge_fragment(config, fragment)
            save_config(merged, workspace.config_path)
        return {"fragment": fragment, "config_path": str(workspace.config_path), "config": merged.to_dict()}

    @app.get("/api/images/{ref:path}", dependencies=[Depends(check_auth)])
    def image(ref: str):
        path = (workspace.root / ref).resolve()
        if not str(path).startswith(str(workspace.root.resolve())) or not path.exists():
            raise HTTPException(status_code=404, detail=f"unknown image ref '{ref}'")
        return FileResponse(path, media_type="image/png")

    if ui_dist and Path(ui_dist).exists():
        app.mount("/", StaticFiles(directory=str(ui_dist), html=True), name="ui")

    return app


def serve(workspace_root, port: int = 8777, ui_dist=None, token: str | None = None):
    import uvicorn

    app = build_app(workspace_root, ui_dist=ui_dist, token=token)
    uvicorn.run(app, host="127.0.0.1", port=port)
