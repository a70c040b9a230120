"""Line-delimited manifest serialization and the content-addressed blob store.

A manifest file is one header record followed by one record per line. All
writes are canonical JSON (sorted keys, compact separators, no timestamps),
so re-serializing an unmodified manifest is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ManifestError
from .rasters import encode_png, load_image
from .records import DatasetManifest, EditPairRecord, FunnelStats, ManifestEntry

FORMAT_VERSION = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class BlobStore:
    """Content-addressed PNG storage under a workspace root.

    Refs look like ``blobs/3f/3fa9...d2.png`` and are relative to the root, so
    manifests stay relocatable alongside their workspace.
    """

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def put_png(self, array: np.ndarray) -> str:
        data = encode_png(array)
        digest = hashlib.sha256(data).hexdigest()
        ref = f"blobs/{digest[:2]}/{digest}.png"
        path = self.root / ref
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
        return ref

    def path(self, ref: str) -> Path:
        return self.root / ref

    def load(self, ref: str) -> np.ndarray:
        path = self.root / ref
        if not path.exists():
            raise ManifestError(f"blob ref '{ref}' does not resolve under {self.root}")
        return load_image(path)


@dataclass
class PairManifest:
    """Working manifest carried between pipeline stages (pre-assembly)."""

    records: list[EditPairRecord]
    funnel: FunnelStats
    config_digest: str
    stages_completed: list[str] = field(default_factory=list)
    stage_detail: dict = field(default_factory=dict)


def _dump_lines(header: dict, rows: list[dict]) -> str:
    lines = [canonical_json(header)]
    lines.extend(canonical_json(row) for row in rows)
    return "\n".join(lines) + "\n"


def _read_lines(path) -> list[dict]:
    text = Path(path).read_text()
    rows = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ManifestError(f"not valid JSON ({exc.msg})", line=number) from exc
    if not rows:
        raise ManifestError("manifest file is empty", line=1)
    return rows


def _check_header(rows: list[dict], expected_schema: str) -> dict:
    header = rows[0]
    if header.get("kind") != "header":
        raise ManifestError("first record must be the manifest header", line=1)
    if header.get("schema") != expected_schema:
        raise ManifestError(f"expected schema '{expected_schema}', got '{header.get('schema')}'", line=1)
    return header


def write_manifest(manifest: DatasetManifest, path) -> None:
    manifest.validate()
    header = {
        "kind": "header",
        "schema": "dataset",
        "format_version": FORMAT_VERSION,
        "config_digest": manifest.config_digest,
        "funnel": manifest.funnel.to_list(),
        "stage_detail": manifest.stage_detail,
        "kind_counts": manifest.kind_counts,
    }
    rows = [dict(entry.to_dict(), kind="entry") for entry in manifest.entries]
    Path(path).write_text(_dump_lines(header, rows))


def read_manifest(path) -> DatasetManifest:
    rows = _read_lines(path)
    header = _check_header(rows, "dataset")
    try:
        funnel = FunnelStats.from_list(header.get("funnel", []))
    except ManifestError as exc:
        raise ManifestError(str(exc), line=1) from exc
    entries = []
    for number, row in enumerate(rows[1:], start=2):
        if row.get("kind") != "entry":
            raise ManifestError(f"unexpected record kind '{row.get('kind')}'", line=number)
        try:
            entries.append(ManifestEntry.from_dict(row))
        except (KeyError, ValueError, TypeError) as exc:
            raise ManifestError(f"bad entry: {exc}", line=number) from exc
    manifest = DatasetManifest(
        entries=entries,
        funnel=funnel,
        config_digest=header.get("config_digest", ""),
        stage_detail=dict(header.get("stage_detail", {})),
        kind_counts=dict(header.get("kind_counts", {})),
    )
    manifest.validate()
    return manifest


def write_pair_manifest(pm: PairManifest, path) -> None:
    for record in pm.records:
        record.validate()
    header = {
        "kind": "header",
        "schema": "pairs",
        "format_version": FORMAT_VERSION,
        "config_digest": pm.config_digest,
        "funnel": pm.funnel.to_list(),
        "stages_completed": pm.stages_completed,
        "stage_detail": pm.stage_detail,
    }
    rows = [dict(record.to_dict(), kind="pair") for record in sorted(pm.records, key=lambda r: r.pair_id)]
    Path(path).write_text(_dump_lines(header, rows))


def read_pair_manifest(path) -> PairManifest:
    rows = _read_lines(path)
    header = _check_header(rows, "pairs")
    try:
        funnel = FunnelStats.from_list(header.get("funnel", []))
    except ManifestError as exc:
        raise ManifestError(str(exc), line=1) from exc
    records = []
    for number, row in enumerate(rows[1:], start=2):
        if row.get("kind") != "pair":
            raise ManifestError(f"unexpected record kind '{row.get('kind')}'", line=number)
        try:
            records.append(EditPairRecord.from_dict(row))
        except (KeyError, ValueError, TypeError) as exc:
            raise ManifestError(f"bad pair record: {exc}", line=number) from exc
    return PairManifest(
        records=records,
        funnel=funnel,
        config_digest=header.get("config_digest", ""),
        stages_completed=list(header.get("stages_completed", [])),
        stage_detail=dict(header.get("stage_detail", {})),
    )
