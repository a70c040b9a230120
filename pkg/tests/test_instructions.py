import numpy as np
import pytest

from addpipe.errors import InstructionGenerationError
from addpipe.instructions import (
    IclExample,
    assemble_dataset,
    attach_location,
    build_icl_transcript,
    build_vlm_prompt,
    class_instruction,
    load_icl_bank,
    location_phrase,
    reference_instruction,
    summarize_instruction_counts,
    vlm_llm_instruction,
)
from addpipe.rasters import MASK_ON
from addpipe.records import LOCATION_LABELS, EditPairRecord, FunnelStats, Instruction


class TestClassInstruction:
    def test_basic_template(self):
        instruction = class_instruction("cat")
        assert instruction.text == "add a cat"
        assert instruction.kind == "class_template"

    def test_vowel_article(self):
        assert class_instruction("umbrella").text == "add an umbrella"

    def test_empty_label_rejected(self):
        with pytest.raises(ValueError):
            class_instruction("")


class TestReferenceInstruction:
    def test_reference_template(self):
        instruction = reference_instruction("man in a red shirt on the left")
        assert instruction.text == "add a man in a red shirt on the left"
        assert instruction.kind == "reference"

    def test_vowel_article(self):
        assert reference_instruction("orange cat").text == "add an orange cat"

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            reference_instruction("")


class TestVlmPrompt:
    def test_both_placeholders_substituted(self):
        prompt = build_vlm_prompt("dog")
        assert prompt == (
            "Accurately describe the main characteristics of the dog. "
            "Use few words which best describe the dog"
        )
        assert prompt.count("dog") == 2

    def test_no_residual_placeholder(self):
        assert "<" not in build_vlm_prompt("fire hydrant")


class TestIclTranscript:
    def _bank(self, k=5):
        return [IclExample(f"caption {i}", f"label{i}", f"response {i}") for i in range(k)]

    def test_turn_count(self):
        transcript = build_icl_transcript("a red cat", "cat", self._bank(), k=5)
        assert len(transcript) == 11
        roles = [role for role, _ in transcript]
        assert roles == ["user", "assistant"] * 5 + ["user"]

    def test_user_turns_carry_fixed_sentence(self):
        transcript = build_icl_transcript("a red cat", "cat", self._bank(), k=5)
        for role, text in transcript:
            if role == "user":
                assert "Ignore surroundings and background" in text

    def test_query_caption_appears_once_in_final_turn(self):
        transcript = build_icl_transcript("a very unusual zebra", "zebra", self._bank(), k=5)
        occurrences = [text for role, text in transcript if "a very unusual zebra" in text]
        assert len(occurrences) == 1
        assert transcript[-1][1] == occurrences[0]
        assert transcript[-1][0] == "user"

    def test_wrong_example_count_rejected(self):
        with pytest.raises(ValueError):
            build_icl_transcript("c", "cat", self._bank(3), k=5)

    def test_packaged_bank_has_five_examples(self):
        assert len(load_icl_bank()) == 5


class TestVlmLlmInstruction:
    def _inputs(self):
        rng = np.random.default_rng(0)
        image = rng.integers(0, 255, size=(16, 16, 3)).astype(np.uint8)
        mask = np.zeros((16, 16), dtype=np.uint8)
        mask[4:10, 4:10] = MASK_ON
        return image, mask

    def test_deterministic_for_fixed_inputs(self, stub_backends):
        image, mask = self._inputs()
        bank = load_icl_bank()
        first = vlm_llm_instruction(image, mask, "cat", stub_backends.captioner, stub_backends.writer, bank)
        second = vlm_llm_instruction(image, mask, "cat", stub_backends.captioner, stub_backends.writer, bank)
        assert first.text == second.text
        assert first.kind == "vlm_llm"

    def test_provenance_keeps_raw_caption(self, stub_backends):
        image, mask = self._inputs()
        bank = load_icl_bank()
        instruction = vlm_llm_instruction(image, mask, "cat", stub_backends.captioner, stub_backends.writer, bank)
        from addpipe.instructions import build_vlm_prompt
        from addpipe.rasters import composite_on_mean_background

        composite = composite_on_mean_background(image, mask, 0.0, 0)
        raw = stub_backends.captioner.describe(composite, build_vlm_prompt("cat"))
        assert instruction.provenance["caption"] == raw
        assert "transcript_digest" in instruction.provenance

    def test_ten_records_all_vlm_kind(self, stub_backends):
        bank = load_icl_bank()
        rng = np.random.default_rng(1)
        outputs = []
        for _ in range(10):
            image = rng.integers(0, 255, size=(12, 12, 3)).astype(np.uint8)
            mask = np.zeros((12, 12), dtype=np.uint8)
            mask[3:8, 3:8] = MASK_ON
            outputs.append(
                vlm_llm_instruction(image, mask, "dog", stub_backends.captioner, stub_backends.writer, bank)
            )
        assert len(outputs) == 10
        assert all(o.kind == "vlm_llm" for o in outputs)

    def test_empty_caption_raises_with_stage(self, stub_backends):
        class EmptyCaptioner:
            def describe(self, raster, prompt):
                return ""

        image, mask = self._inputs()
        with pytest.raises(InstructionGenerationError) as err:
            vlm_llm_instruction(image, mask, "cat", EmptyCaptioner(), stub_backends.writer, load_icl_bank())
        assert err.value.stage == "caption"


class TestLocationPhrase:
    def _mask_at(self, cx, cy, size=90):
        mask = np.zeros((size, size), dtype=np.uint8)
        mask[cy, cx] = MASK_ON
        return mask

    def test_center(self):
        # single pixel at the exact middle: centroid (0.5W, 0.5H)
        size = 90
        mask = self._mask_at(size // 2, size // 2, size)
        # centroid x = 45.5 which is within (30, 60]
        assert location_phrase(mask, size, size) == "center"

    def test_top_left(self):
        size = 90
        assert location_phrase(self._mask_at(9, 9, size), size, size) == "top-left"

    def test_boundary_assigned_to_lower_cell(self):
        # centroid exactly at x = W/3: pixels 28 and 31 average to 29.5, +0.5 = 30 = 90/3
        size = 90
        mask = np.zeros((size, size), dtype=np.uint8)
        mask[45, 28] = MASK_ON
        mask[45, 31] = MASK_ON
        assert location_phrase(mask, size, size) in ("left",)
        # x centroid == 30.0 == W/3 -> column 0 (lower-index cell)
        assert location_phrase(mask, size, size) == "left"

    def test_all_nine_cells_reachable(self):
        size = 90
        seen = set()
        for row_center in (10, 45, 80):
            for col_center in (10, 45, 80):
                seen.add(location_phrase(self._mask_at(col_center, row_center, size), size, size))
        assert seen == set(LOCATION_LABELS)

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError):
            location_phrase(np.zeros((9, 9), dtype=np.uint8), 9, 9)


class TestAttachLocation:
    def _instruction(self):
        return Instruction(text="add a cat", kind="class_template")

    def test_p_zero_never_appends(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            assert attach_location(self._instruction(), "center", 0.0, rng).text == "add a cat"

    def test_p_one_always_appends(self):
        rng = np.random.default_rng(0)
        out = attach_location(self._instruction(), "top-right", 1.0, rng)
        assert out.text == "add a cat at the top-right of the image"
        assert out.location_phrase == "top-right"

    def test_frequency_converges(self):
        rng = np.random.default_rng(42)
        n = 100_000
        appended = sum(
            1 for _ in range(n)
            if attach_location(self._instruction(), "center", 0.25, rng).location_phrase is not None
        )
        assert abs(appended / n - 0.25) <= 0.005

    def test_unknown_phrase_rejected(self):
        with pytest.raises(ValueError):
            attach_location(self._instruction(), "middle", 0.25, np.random.default_rng(0))


class TestAssembleDataset:
    def _pairs(self, n):
        pairs = []
        for i in range(n):
            record = EditPairRecord(
                pair_id=f"p{i}", record_id=f"r{i}", object_label="cat",
                mask_ref="m", target_image_ref="t",
            )
            record.source_image_ref = "s"
            record.seed = i
            pairs.append(record)
        return pairs

    def test_paper_count_arithmetic(self):
        summary = summarize_instruction_counts(
            {"class_template": 887_773, "vlm_llm": 887_773, "reference": 104_373}
        )
        assert summary["total"] == 1_879_919

    def test_three_pairs_one_instruction_each(self):
        pairs = self._pairs(3)
        instructions = {p.pair_id: [Instruction(text="add a cat", kind="class_template")] for p in pairs}
        manifest = assemble_dataset(pairs, instructions, FunnelStats((("ingest", 3),)), "digest")
        assert len(manifest.entries) == 3
        assert manifest.kind_counts == {"class_template": 3}

    def test_duplicate_pair_id_rejected(self):
        pairs = self._pairs(2)
        pairs[1].pair_id = pairs[0].pair_id
        instructions = {pairs[0].pair_id: [Instruction(text="add a cat", kind="class_template")]}
        with pytest.raises(ValueError, match="duplicate"):
            assemble_dataset(pairs, instructions, FunnelStats((("ingest", 2),)), "digest")

    def test_pair_without_instructions_rejected(self):
        pairs = self._pairs(1)
        with pytest.raises(ValueError, match="no instructions"):
            assemble_dataset(pairs, {}, FunnelStats((("ingest", 1),)), "digest")

    def test_total_equals_sum_of_kinds(self):
        pairs = self._pairs(4)
        instructions = {
            "p0": [Instruction(text="add a cat", kind="class_template")],
            "p1": [
                Instruction(text="add a cat", kind="class_template"),
                Instruction(text="add a fluffy cat", kind="vlm_llm"),
            ],
            "p2": [Instruction(text="add a cat on a mat", kind="reference")],
            "p3": [Instruction(text="add a cat", kind="class_template")],
        }
        manifest = assemble_dataset(pairs, instructions, FunnelStats((("ingest", 4),)), "digest")
        summary = summarize_instruction_counts(manifest.kind_counts)
        assert summary["total"] == sum(len(v) for v in instructions.values()) == 5

    def test_template_kinds_start_with_add(self):
        for instruction in (class_instruction("cat"), reference_instruction("orange cat")):
            assert instruction.text.startswith(("add a ", "add an "))
