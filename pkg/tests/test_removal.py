import numpy as np
import pytest

from addpipe.removal import build_removal_prompts, generate_candidates


class TestRemovalPrompts:
    def test_paper_prompt_strings(self):
        positive, negative = build_removal_prompts("dog")
        assert positive == "a photo of a background, a photo of an empty place"
        assert negative == "an object, a dog"

    def test_multiword_label_substituted(self):
        _, negative = build_removal_prompts("fire hydrant")
        assert negative == "an object, a fire hydrant"

    def test_empty_label_rejected(self):
        with pytest.raises(ValueError):
            build_removal_prompts("")


class TestGenerateCandidates:
    def _inputs(self):
        rng = np.random.default_rng(5)
        image = rng.integers(0, 255, size=(16, 16, 3)).astype(np.uint8)
        mask = np.zeros((16, 16), dtype=np.uint8)
        mask[4:10, 4:10] = 255
        return image, mask

    def test_three_candidates_with_distinct_seeds(self, stub_backends):
        image, mask = self._inputs()
        candidates = generate_candidates(image, mask, "cat", stub_backends.inpainter, n=3, seed_base=100)
        assert [c.seed for c in candidates] == [100, 101, 102]
        assert [c.candidate_index for c in candidates] == [0, 1, 2]
        assert all(c.image.shape == image.shape for c in candidates)

    def test_zero_mask_candidates_equal_source(self, stub_backends):
        image, _ = self._inputs()
        mask = np.zeros((16, 16), dtype=np.uint8)
        candidates = generate_candidates(image, mask, "cat", stub_backends.inpainter, n=3, seed_base=0)
        for candidate in candidates:
            assert np.array_equal(candidate.image, image)

    def test_same_seed_base_is_deterministic(self, stub_backends):
        image, mask = self._inputs()
        first = generate_candidates(image, mask, "cat", stub_backends.inpainter, n=3, seed_base=7)
        second = generate_candidates(image, mask, "cat", stub_backends.inpainter, n=3, seed_base=7)
        for a, b in zip(first, second):
            assert np.array_equal(a.image, b.image)

    def test_distinct_seeds_give_distinct_textures(self, stub_backends):
        image, mask = self._inputs()
        candidates = generate_candidates(image, mask, "cat", stub_backends.inpainter, n=3, seed_base=0)
        assert not np.array_equal(candidates[0].image, candidates[1].image)

    def test_bad_candidate_count_rejected(self, stub_backends):
        image, mask = self._inputs()
        with pytest.raises(ValueError):
            generate_candidates(image, mask, "cat", stub_backends.inpainter, n=0)

    def test_mask_shape_mismatch_rejected(self, stub_backends):
        image, _ = self._inputs()
        with pytest.raises(ValueError):
            generate_candidates(image, np.zeros((8, 8), dtype=np.uint8), "cat", stub_backends.inpainter)
