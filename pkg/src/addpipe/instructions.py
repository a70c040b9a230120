"""Addition-instruction synthesis: class templates, captioner+writer two-stage, references.

Also hosts the nine-cell location grid and final dataset assembly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InstructionGenerationError
from .rasters import composite_on_mean_background
from .records import (
    LOCATION_LABELS,
    DatasetManifest,
    EditPairRecord,
    FunnelStats,
    Instruction,
    ManifestEntry,
)

VLM_PROMPT_TEMPLATE = (
    "Accurately describe the main characteristics of the {label}. "
    "Use few words which best describe the {label}"
)

ICL_USER_TEMPLATE = (
    "Convert the following sentence into a short image addition instruction: {caption}. "
    "Use straightforward language and describe only the {label}. "
    "Ignore surroundings and background and avoid pictorial description."
)


def _with_article(verb: str, noun_phrase: str) -> str:
    article = "an" if noun_phrase[:1].lower() in "aeiou" else "a"
    return f"{verb} {article} {noun_phrase}"


def class_instruction(object_label: str) -> Instruction:
    if not object_label:
        raise ValueError("object label must be non-empty")
    return Instruction(text=_with_article("add", object_label), kind="class_template")


def reference_instruction(reference_text: str) -> Instruction:
    if not reference_text:
        raise ValueError("reference text must be non-empty")
    return Instruction(text=_with_article("add", reference_text), kind="reference")


def build_vlm_prompt(object_label: str) -> str:
    if not object_label:
        raise ValueError("object label must be non-empty")
    return VLM_PROMPT_TEMPLATE.format(label=object_label)


@dataclass(frozen=True)
class IclExample:
    caption: str
    label: str
    response: str


def load_icl_bank(path=None) -> list[IclExample]:
    """Load the in-context example bank (the packaged default, or a swap-in file)."""
    if path:
        raw = json.loads(Path(path).read_text())
    else:
        raw = json.loads(resources.files("addpipe.data").joinpath("icl_bank.json").read_text())
    return [IclExample(r["caption"], r["label"], r["response"]) for r in raw]


def build_icl_transcript(caption: str, object_label: str, icl_examples: list[IclExample], k: int = 5):
    """Alternating user/assistant transcript: k worked examples, then the open query turn."""
    if len(icl_examples) != k:
        raise ValueError(f"expected exactly {k} in-context examples, got {len(icl_examples)}")
    transcript = []
    for example in icl_examples:
        transcript.append(("user", ICL_USER_TEMPLATE.format(caption=example.caption, label=example.label)))
        transcript.append(("assistant", example.response))
    transcript.append(("user", ICL_USER_TEMPLATE.format(caption=caption, label=object_label)))
    return transcript


def vlm_llm_instruction(
    image: np.ndarray,
    mask: np.ndarray,
    object_label: str,
    captioner,
    writer,
    icl_bank: list[IclExample],
    feather_sigma: float = 0.0,
    dilate_radius: int = 0,
    icl_k: int = 5,
) -> Instruction:
    """Two-stage synthesis: caption the isolated object, then rewrite it as an instruction."""
    if not mask.any():
        raise ValueError("mask must be non-empty")
    composite = composite_on_mean_background(image, mask, feather_sigma, dilate_radius)
    caption = captioner.describe(composite, build_vlm_prompt(object_label))
    if not caption:
        raise InstructionGenerationError("caption", "captioner returned empty output")
    transcript = build_icl_transcript(caption, object_label, icl_bank, icl_k)
    text = writer.complete(transcript)
    if not text:
        raise InstructionGenerationError("completion", "writer returned empty output")
    digest = hashlib.sha256(repr(transcript).encode()).hexdigest()[:16]
    return Instruction(
        text=text,
        kind="vlm_llm",
        provenance={"caption": caption, "transcript_digest": digest},
    )


def location_phrase(mask: np.ndarray, width: int, height: int) -> str:
    """Map the mask centroid to one of nine grid cells by thirds of width/height.

    Centroids exactly on a third boundary go to the lower-index cell.
    """
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        raise ValueError("mask must be non-empty")
    cx = float(xs.mean()) + 0.5
    cy = float(ys.mean()) + 0.5

    def third(value: float, extent: float) -> int:
        if value <= extent / 3.0:
            return 0
        if value <= 2.0 * extent / 3.0:
            return 1
        return 2

    return LOCATION_LABELS[third(cy, height) * 3 + third(cx, width)]


def attach_location(instruction: Instruction, phrase: str, p: float, rng: np.random.Generator) -> Instruction:
    """With probability p, append "at the <phrase> of the image" to the instruction."""
    if phrase not in LOCATION_LABELS:
        raise ValueError(f"'{phrase}' is not one of the nine location labels")
    if rng.random() >= p:
        return instruction
    return Instruction(
        text=f"{instruction.text} at the {phrase} of the image",
        kind=instruction.kind,
        location_phrase=phrase,
        provenance=instruction.provenance,
    )


def summarize_instruction_counts(kind_counts: dict[str, int]) -> dict:
    """Exact integer totals per instruction kind plus the grand total."""
    total = 0
    for kind, count in kind_counts.items():
        if count < 0:
            raise ValueError(f"negative count for kind '{kind}'")
        total += int(count)
    return {"per_kind": {k: int(v) for k, v in kind_counts.items()}, "total": total}


def assemble_dataset(
    pairs: list[EditPairRecord],
    instructions_by_pair: dict[str, list[Instruction]],
    funnel: FunnelStats,
    config_digest: str,
    stage_detail: dict | None = None,
) -> DatasetManifest:
    """Combine surviving pairs and their instructions into the final manifest."""
    entries = []
    seen = set()
    kind_counts: dict[str, int] = {}
    for record in pairs:
        if record.pair_id in seen:
            raise ValueError(f"duplicate pair_id '{record.pair_id}'")
        seen.add(record.pair_id)
        instructions = instructions_by_pair.get(record.pair_id, [])
        if not instructions:
            raise ValueError(f"pair '{record.pair_id}' has no instructions")
        if record.source_image_ref is None:
            raise ValueError(f"pair '{record.pair_id}' has no source image")
        for instr in instructions:
            kind_counts[instr.kind] = kind_counts.get(instr.kind, 0) + 1
        entries.append(
            ManifestEntry(
                pair_id=record.pair_id,
                source_image_ref=record.source_image_ref,
                target_image_ref=record.target_image_ref,
                mask_ref=record.mask_ref,
                object_label=record.object_label,
                instructions=list(instructions),
                scores=dict(record.scores),
                seed=record.seed,
            )
        )
    entries.sort(key=lambda e: e.pair_id)
    summary = summarize_instruction_counts(kind_counts)
    manifest = DatasetManifest(
        entries=entries,
        funnel=funnel,
        config_digest=config_digest,
        stage_detail=dict(stage_detail or {}),
        kind_counts=summary["per_kind"],
    )
    manifest.validate()
    return manifest
