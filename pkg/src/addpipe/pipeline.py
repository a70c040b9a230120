"""Stage orchestration: fixed-order, resumable execution over a workspace directory.

Stage order: ingest -> prefilter -> remove -> postfilter -> instructions -> assemble.
Each stage reads its predecessor's manifest, appends one funnel count, and is a
no-op when rerun with an identical config digest.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backends import BackendBundle
from .config import PipelineConfig, feather_sigma_for
from .errors import BackendProtocolError, BackendUnavailableError, ConfigDigestError, StageOrderError
from .ingest import ingest_coco_style, read_reference_file
from .instructions import (
    attach_location,
    class_instruction,
    load_icl_bank,
    location_phrase,
    reference_instruction,
    vlm_llm_instruction,
)
from .manifest import BlobStore, PairManifest, read_pair_manifest, write_manifest, write_pair_manifest
from .pre_removal import abnormality_score, dilate_mask, dilation_radius, filter_mask_geometry
from .rasters import load_image
from .records import (
    FAIL,
    PASS,
    EditPairRecord,
    FunnelStats,
    ImageRecord,
    Instruction,
    MaskAnnotation,
    RemovalCandidate,
    pair_id_for,
)
from .removal import generate_candidates
from .post_removal import run_post_removal

STAGE_SEQUENCE = ("ingest", "prefilter", "remove", "postfilter", "instructions", "assemble")


@dataclass
class Workspace:
    root: Path

    def __post_init__(self):
        self.root = Path(self.root)
        self.root.mkdir(parents=True, exist_ok=True)

    @property
    def blobs(self) -> BlobStore:
        return BlobStore(self.root)

    def manifest_path(self, stage: str) -> Path:
        return self.root / f"{stage}.manifest.jsonl"

    @property
    def candidates_path(self) -> Path:
        return self.root / "candidates.jsonl"

    @property
    def scored_candidates_path(self) -> Path:
        return self.root / "candidates_scored.jsonl"

    @property
    def instructions_path(self) -> Path:
        return self.root / "instructions.jsonl"

    @property
    def dataset_path(self) -> Path:
        return self.root / "dataset.manifest.jsonl"

    @property
    def annotations_log(self) -> Path:
        return self.root / "annotations.log"

    @property
    def config_path(self) -> Path:
        return self.root / "config.yaml"

    @property
    def reports_dir(self) -> Path:
        path = self.root / "reports"
        path.mkdir(parents=True, exist_ok=True)
        return path


def _map_records(items, fn, workers: int):
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _pair_rng(seed: int, pair_id: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}\x1f{pair_id}".encode()).hexdigest()
    return np.random.default_rng(int(digest[:16], 16))


def _write_jsonl(rows: list[dict], path: Path) -> None:
    path.write_text("".join(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n" for row in rows))


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def _survivors(records: list[EditPairRecord]) -> list[EditPairRecord]:
    return [r for r in records if not r.failed]


# ---------------------------------------------------------------------------
# Stage implementations
# ---------------------------------------------------------------------------


def stage_ingest(
    workspace: Workspace,
    config: PipelineConfig,
    backends: BackendBundle,
    annotation_file,
    image_dir,
    source_tag: str = "coco",
    dedup: bool = False,
) -> PairManifest:
    result = ingest_coco_style(annotation_file, image_dir, source_tag=source_tag, dedup=dedup)
    blobs = workspace.blobs
    image_refs = {}
    for image in result.image_records:
        image_refs[image.record_id] = blobs.put_png(load_image(image.image_ref))

    records = []
    for mask_ann in result.mask_annotations:
        pair_id = pair_id_for(mask_ann.record_id, mask_ann.annotation_id)
        record = EditPairRecord(
            pair_id=pair_id,
            record_id=mask_ann.record_id,
            object_label=mask_ann.object_label,
            mask_ref=blobs.put_png(mask_ann.mask),
            target_image_ref=image_refs[mask_ann.record_id],
            annotation_id=mask_ann.annotation_id,
        )
        record.mark("ingest", PASS)
        records.append(record)

    funnel = FunnelStats(()).appended("ingest", len(records))
    return PairManifest(
        records=records,
        funnel=funnel,
        config_digest=config.digest(),
        stages_completed=["ingest"],
        stage_detail={"ingest_warnings": len(result.warnings)},
    )


def stage_prefilter(workspace: Workspace, config: PipelineConfig, backends: BackendBundle, pm: PairManifest) -> PairManifest:
    blobs = workspace.blobs
    cfg = config.pre_removal
    sigma_rule = config.post_removal.feather_sigma_rule

    def process(record: EditPairRecord) -> EditPairRecord:
        if record.failed:
            return record
        mask = blobs.load(record.mask_ref)
        image = blobs.load(record.target_image_ref)
        image_record = ImageRecord(record.record_id, record.target_image_ref, image.shape[1], image.shape[0])
        mask_ann = MaskAnnotation.from_mask(record.record_id, record.annotation_id or "", record.object_label, mask)
        decision = filter_mask_geometry(mask_ann, image_record, cfg)
        if not decision.passed:
            record.mark("prefilter", FAIL, decision.reason)
            return record
        radius = dilation_radius(mask, cfg.dilation)
        sigma = feather_sigma_for(radius, sigma_rule)
        score = abnormality_score(image, mask, record.object_label, backends.embedder, sigma, radius)
        record.scores["abnormality"] = score
        if score < cfg.abnormality_threshold:
            record.mark("prefilter", FAIL, "abnormal_view")
            return record
        record.dilated_mask_ref = blobs.put_png(dilate_mask(mask, radius, cfg.dilation.element))
        record.mark("prefilter", PASS)
        return record

    records = _map_records(pm.records, process, config.workers)
    funnel = pm.funnel.appended("prefilter", len(_survivors(records)))
    return PairManifest(records, funnel, pm.config_digest, pm.stages_completed + ["prefilter"], dict(pm.stage_detail))


def stage_remove(workspace: Workspace, config: PipelineConfig, backends: BackendBundle, pm: PairManifest) -> PairManifest:
    blobs = workspace.blobs
    cfg = config.removal

    def process(record: EditPairRecord):
        if record.failed:
            return record, []
        image = blobs.load(record.target_image_ref)
        dilated = blobs.load(record.dilated_mask_ref)
        try:
            candidates = generate_candidates(
                image, dilated, record.object_label, backends.inpainter,
                n=cfg.n_candidates, steps=cfg.steps, seed_base=cfg.seed_base, pair_id=record.pair_id,
            )
        except (BackendUnavailableError, BackendProtocolError) as exc:
            record.mark("remove", FAIL, f"inpaint_error:{exc}")
            return record, []
        rows = []
        for candidate in candidates:
            ref = blobs.put_png(candidate.image)
            rows.append(
                {
                    "pair_id": record.pair_id,
                    "candidate_index": candidate.candidate_index,
                    "image_ref": ref,
                    "seed": candidate.seed,
                }
            )
        record.mark("remove", PASS)
        return record, rows

    results = _map_records(pm.records, process, config.workers)
    records = [record for record, _ in results]
    candidate_rows = [row for _, rows in results for row in rows]
    candidate_rows.sort(key=lambda r: (r["pair_id"], r["candidate_index"]))
    _write_jsonl(candidate_rows, workspace.candidates_path)
    funnel = pm.funnel.appended("remove", len(_survivors(records)))
    return PairManifest(records, funnel, pm.config_digest, pm.stages_completed + ["remove"], dict(pm.stage_detail))


def stage_postfilter(workspace: Workspace, config: PipelineConfig, backends: BackendBundle, pm: PairManifest) -> PairManifest:
    blobs = workspace.blobs
    cfg = config.post_removal
    candidate_rows = _read_jsonl(workspace.candidates_path)
    by_pair: dict[str, list[dict]] = {}
    for row in candidate_rows:
        by_pair.setdefault(row["pair_id"], []).append(row)

    def process(record: EditPairRecord):
        if record.failed:
            return record, []
        rows = sorted(by_pair.get(record.pair_id, []), key=lambda r: r["candidate_index"])
        original = blobs.load(record.target_image_ref)
        mask = blobs.load(record.mask_ref)
        candidates = [
            RemovalCandidate(record.pair_id, row["candidate_index"], row["image_ref"], row["seed"]) for row in rows
        ]
        images = [blobs.load(row["image_ref"]) for row in rows]
        record, blended, mm_results = run_post_removal(
            record, candidates, original, mask, backends, cfg,
            dilation_cfg=config.pre_removal.dilation, candidate_images=images,
        )
        if blended is not None:
            record.source_image_ref = blobs.put_png(blended)
        scored = []
        for index, row in enumerate(rows):
            entry = {
                "pair_id": record.pair_id,
                "candidate_index": row["candidate_index"],
                "image_ref": row["image_ref"],
                "original_ref": record.target_image_ref,
                "mask_ref": record.mask_ref,
                "object_label": record.object_label,
                "seed": row["seed"],
                "consensus": record.scores.get("consensus"),
            }
            if index < len(mm_results):
                entry["mm_pre"] = mm_results[index].pre_score
                entry["mm_post"] = mm_results[index].post_score
            if record.selected_candidate == row["candidate_index"]:
                entry["selected"] = True
                if "importance" in record.scores:
                    entry["importance"] = record.scores["importance"]
            scored.append(entry)
        return record, scored

    results = _map_records(pm.records, process, config.workers)
    records = [record for record, _ in results]
    scored_rows = [row for _, rows in results for row in rows]
    scored_rows.sort(key=lambda r: (r["pair_id"], r["candidate_index"]))
    _write_jsonl(scored_rows, workspace.scored_candidates_path)

    survivors = _survivors(records)
    detail = dict(pm.stage_detail)
    detail["consensus"] = sum(1 for r in records if r.flag("consensus") == PASS)
    detail["mm_clip"] = sum(1 for r in records if r.flag("mm_clip") == PASS)
    detail["importance"] = sum(1 for r in records if r.flag("importance") == PASS)
    for record in records:
        if not record.failed:
            record.mark("postfilter", PASS)
    funnel = pm.funnel.appended("postfilter", len(survivors))
    return PairManifest(records, funnel, pm.config_digest, pm.stages_completed + ["postfilter"], detail)


def stage_instructions(workspace: Workspace, config: PipelineConfig, backends: BackendBundle, pm: PairManifest) -> PairManifest:
    blobs = workspace.blobs
    cfg = config.instructions
    icl_bank = load_icl_bank(cfg.icl_bank_file or None)
    references = read_reference_file(cfg.reference_file) if cfg.reference_file else {}
    sigma_rule = config.post_removal.feather_sigma_rule

    def process(record: EditPairRecord):
        if record.failed:
            return record, None
        image = blobs.load(record.target_image_ref)
        mask = blobs.load(record.mask_ref)
        radius = dilation_radius(mask, config.pre_removal.dilation)
        sigma = feather_sigma_for(radius, sigma_rule)
        instructions: list[Instruction] = [class_instruction(record.object_label)]
        instructions.append(
            vlm_llm_instruction(
                image, mask, record.object_label, backends.captioner, backends.writer,
                icl_bank, feather_sigma=sigma, dilate_radius=radius, icl_k=cfg.icl_k,
            )
        )
        for text in references.get(record.annotation_id or "", []):
            instructions.append(reference_instruction(text))
        phrase = location_phrase(mask, mask.shape[1], mask.shape[0])
        rng = _pair_rng(config.seed, record.pair_id)
        instructions = [attach_location(inst, phrase, cfg.location_p, rng) for inst in instructions]
        record.mark("instructions", PASS)
        return record, {"pair_id": record.pair_id, "instructions": [inst.to_dict() for inst in instructions]}

    results = _map_records(pm.records, process, config.workers)
    records = [record for record, _ in results]
    rows = sorted((row for _, row in results if row is not None), key=lambda r: r["pair_id"])
    _write_jsonl(rows, workspace.instructions_path)
    funnel = pm.funnel.appended("instructions", len(_survivors(records)))
    return PairManifest(records, funnel, pm.config_digest, pm.stages_completed + ["instructions"], dict(pm.stage_detail))


def stage_assemble(workspace: Workspace, config: PipelineConfig, backends: BackendBundle, pm: PairManifest) -> PairManifest:
    from .instructions import assemble_dataset

    instructions_by_pair = {
        row["pair_id"]: [Instruction.from_dict(d) for d in row["instructions"]]
        for row in _read_jsonl(workspace.instructions_path)
    }
    survivors = _survivors(pm.records)
    funnel = pm.funnel.appended("assemble", len(survivors))
    manifest = assemble_dataset(
        survivors, instructions_by_pair, funnel, pm.config_digest, stage_detail=pm.stage_detail
    )
    write_manifest(manifest, workspace.dataset_path)
    for record in survivors:
        record.mark("assemble", PASS)
    return PairManifest(pm.records, funnel, pm.config_digest, pm.stages_completed + ["assemble"], dict(pm.stage_detail))


_STAGE_FUNCTIONS = {
    "ingest": stage_ingest,
    "prefilter": stage_prefilter,
    "remove": stage_remove,
    "postfilter": stage_postfilter,
    "instructions": stage_instructions,
    "assemble": stage_assemble,
}


def run_stage(
    stage_name: str,
    workspace: Workspace,
    config: PipelineConfig,
    backends: BackendBundle,
    force: bool = False,
    **stage_kwargs,
) -> PairManifest:
    """Execute one stage with order validation, digest checks, and no-op reruns."""
    if stage_name not in _STAGE_FUNCTIONS:
        raise StageOrderError(f"unknown stage '{stage_name}'")
    digest = config.digest()

    out_path = workspace.manifest_path(stage_name)
    if out_path.exists() and not force:
        existing = read_pair_manifest(out_path)
        if existing.config_digest == digest and existing.stages_completed[-1:] == [stage_name]:
            return existing

    index = STAGE_SEQUENCE.index(stage_name)
    if stage_name == "ingest":
        pm = _STAGE_FUNCTIONS[stage_name](workspace, config, backends, **stage_kwargs)
    else:
        predecessor = STAGE_SEQUENCE[index - 1]
        in_path = workspace.manifest_path(predecessor)
        if not in_path.exists():
            raise StageOrderError(f"stage '{stage_name}' expects completed stage '{predecessor}' first")
        pm_in = read_pair_manifest(in_path)
        if not pm_in.stages_completed or pm_in.stages_completed[-1] != predecessor:
            raise StageOrderError(
                f"stage '{stage_name}' expects the input manifest's last stage to be '{predecessor}', "
                f"found {pm_in.stages_completed}"
            )
        if pm_in.config_digest != digest and not force:
            raise ConfigDigestError(
                f"input manifest was built with config digest {pm_in.config_digest}, current is {digest}; "
                "rerun from ingest or pass --force"
            )
        pm = _STAGE_FUNCTIONS[stage_name](workspace, config, backends, pm_in, **stage_kwargs)

    write_pair_manifest(pm, out_path)
    return pm


def run_all(
    workspace: Workspace,
    config: PipelineConfig,
    backends: BackendBundle,
    annotation_file,
    image_dir,
    source_tag: str = "synthetic",
    dedup: bool = False,
    force: bool = False,
) -> PairManifest:
    pm = run_stage(
        "ingest", workspace, config, backends, force=force,
        annotation_file=annotation_file, image_dir=image_dir, source_tag=source_tag, dedup=dedup,
    )
    for stage in STAGE_SEQUENCE[1:]:
        pm = run_stage(stage, workspace, config, backends, force=force)
    return pm
