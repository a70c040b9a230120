import pytest

from addpipe.calibration import (
    FAILURE,
    SUCCESS,
    AnnotationStore,
    SweepPoint,
    export_thresholds,
    record_annotation,
    sample_candidates,
    suggest_threshold,
    sweep_threshold,
)
from addpipe.config import PipelineConfig, merge_fragment
from addpipe.errors import CalibrationError

# Hand-enumerated 20-candidate fixture: score is a noisy monotone function of
# failure probability (low score = likely successful removal).
FIXTURE_SCORES = [
    0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14, 0.16, 0.18, 0.20,
    0.22, 0.24, 0.26, 0.28, 0.30, 0.32, 0.34, 0.36, 0.38, 0.40,
]
FIXTURE_LABELS = [
    SUCCESS, SUCCESS, SUCCESS, SUCCESS, SUCCESS, SUCCESS, SUCCESS, FAILURE, SUCCESS, FAILURE,
    SUCCESS, FAILURE, FAILURE, SUCCESS, FAILURE, FAILURE, FAILURE, FAILURE, FAILURE, FAILURE,
]

# Hand-computed sweep table for thresholds below (orientation filter-high):
#   t=0.40 -> filtered  0.0%, retained 20, successes 10 ->  50.0%
#   t=0.30 -> filtered 25.0%, retained 15, successes 10 ->  66.7%
#   t=0.20 -> filtered 50.0%, retained 10, successes  8 ->  80.0%
#   t=0.10 -> filtered 75.0%, retained  5, successes  5 -> 100.0%
#   t=0.05 -> filtered 90.0%, retained  2, successes  2 -> 100.0%
FIXTURE_THRESHOLDS = [0.40, 0.30, 0.20, 0.10, 0.05]
EXPECTED_TABLE = [
    (0.40, 0.0, 50.0),
    (0.30, 25.0, 66.7),
    (0.20, 50.0, 80.0),
    (0.10, 75.0, 100.0),
    (0.05, 90.0, 100.0),
]


def fixture_maps():
    annotations = {(f"p{i:02d}", 0): label for i, label in enumerate(FIXTURE_LABELS)}
    scores = {(f"p{i:02d}", 0): score for i, score in enumerate(FIXTURE_SCORES)}
    return annotations, scores


class TestAnnotationStore:
    def test_relabel_last_write_wins(self, tmp_path):
        store = AnnotationStore(tmp_path / "ann.log")
        record_annotation(store, ("p1", 0), SUCCESS, "alice")
        record_annotation(store, ("p1", 0), FAILURE, "alice")
        assert store.effective_labels()[("p1", 0)] == FAILURE

    def test_majority_vote_tie_is_failure(self, tmp_path):
        store = AnnotationStore(tmp_path / "ann.log")
        record_annotation(store, ("p1", 0), SUCCESS, "alice")
        record_annotation(store, ("p1", 0), FAILURE, "bob")
        assert store.effective_labels()[("p1", 0)] == FAILURE

    def test_majority_vote(self, tmp_path):
        store = AnnotationStore(tmp_path / "ann.log")
        for annotator, label in (("a", SUCCESS), ("b", SUCCESS), ("c", FAILURE)):
            record_annotation(store, ("p1", 0), label, annotator)
        assert store.effective_labels()[("p1", 0)] == SUCCESS

    def test_unknown_candidate_rejected(self, tmp_path):
        store = AnnotationStore(tmp_path / "ann.log", known_candidates={("known", 0)})
        with pytest.raises(CalibrationError):
            record_annotation(store, ("unknown", 0), SUCCESS, "alice")

    def test_log_replay_reproduces_state(self, tmp_path):
        log = tmp_path / "ann.log"
        store = AnnotationStore(log)
        record_annotation(store, ("p1", 0), SUCCESS, "alice")
        record_annotation(store, ("p2", 1), FAILURE, "alice")
        record_annotation(store, ("p1", 0), FAILURE, "alice")
        replayed = AnnotationStore(log)
        assert replayed.effective_labels() == store.effective_labels()
        assert replayed.last_seq == store.last_seq

    def test_bad_label_rejected(self, tmp_path):
        store = AnnotationStore(tmp_path / "ann.log")
        with pytest.raises(CalibrationError):
            record_annotation(store, ("p1", 0), "maybe", "alice")


class TestSweepThreshold:
    def test_hand_enumerated_fixture_table(self):
        annotations, scores = fixture_maps()
        points = sweep_threshold(annotations, scores, FIXTURE_THRESHOLDS, "filter-high")
        produced = [(p.threshold, p.filtered_pct, p.success_pct_retained) for p in points]
        assert produced == EXPECTED_TABLE

    def test_filter_nothing_gives_base_rate(self):
        annotations, scores = fixture_maps()
        [point] = sweep_threshold(annotations, scores, [1.0], "filter-high")
        assert point.filtered_pct == 0.0
        assert point.success_pct_retained == 50.0

    def test_filter_everything_gives_null_success(self):
        annotations, scores = fixture_maps()
        [point] = sweep_threshold(annotations, scores, [0.0], "filter-high")
        assert point.filtered_pct == 100.0
        assert point.success_pct_retained is None

    def test_success_monotone_on_strictly_monotone_scores(self):
        # clean separation: every failure scores above every success
        annotations = {(f"q{i:02d}", 0): (SUCCESS if i < 10 else FAILURE) for i in range(20)}
        scores = {(f"q{i:02d}", 0): i / 100.0 for i in range(20)}
        thresholds = sorted((i / 100.0 for i in range(20)), reverse=True)
        points = sweep_threshold(annotations, scores, thresholds, "filter-high")
        observed = [p.success_pct_retained for p in points if p.success_pct_retained is not None]
        assert observed == sorted(observed)

    def test_filtered_pct_monotone_as_threshold_decreases(self):
        annotations, scores = fixture_maps()
        points = sweep_threshold(annotations, scores, sorted(FIXTURE_THRESHOLDS, reverse=True), "filter-high")
        filtered = [p.filtered_pct for p in points]
        assert filtered == sorted(filtered)

    def test_filter_low_orientation(self):
        annotations, scores = fixture_maps()
        [point] = sweep_threshold(annotations, scores, [0.05], "filter-low")
        # scores below 0.05: only 0.02 and 0.04 -> 2/20 filtered
        assert point.filtered_pct == 10.0

    def test_empty_annotations_rejected(self):
        with pytest.raises(CalibrationError):
            sweep_threshold({}, {}, [0.1], "filter-high")

    def test_missing_score_rejected(self):
        with pytest.raises(CalibrationError):
            sweep_threshold({("p", 0): SUCCESS}, {}, [0.1], "filter-high")


class TestSuggestThreshold:
    def test_flat_curve_returns_first_threshold(self):
        curve = [
            SweepPoint(0.5, 0.0, 70.0),
            SweepPoint(0.4, 25.0, 70.0),
            SweepPoint(0.3, 50.0, 70.0),
        ]
        result = suggest_threshold(curve)
        assert result.threshold == 0.5 and not result.no_plateau

    def test_rising_linear_returns_last_with_flag(self):
        curve = [
            SweepPoint(0.5, 0.0, 40.0),
            SweepPoint(0.4, 25.0, 55.0),
            SweepPoint(0.3, 50.0, 70.0),
        ]
        result = suggest_threshold(curve, epsilon=0.05)
        assert result.threshold == 0.3 and result.no_plateau

    def test_constructed_elbow(self):
        curve = [
            SweepPoint(0.5, 0.0, 40.0),
            SweepPoint(0.4, 20.0, 50.0),
            SweepPoint(0.3, 40.0, 60.0),
            SweepPoint(0.2, 60.0, 60.5),
            SweepPoint(0.1, 80.0, 60.8),
        ]
        result = suggest_threshold(curve, epsilon=0.05)
        assert result.threshold == 0.3 and not result.no_plateau

    def test_fixture_plateau(self):
        annotations, scores = fixture_maps()
        points = sweep_threshold(annotations, scores, FIXTURE_THRESHOLDS, "filter-high")
        result = suggest_threshold(points, epsilon=0.05)
        assert result.threshold == 0.10

    def test_too_few_points_rejected(self):
        with pytest.raises(CalibrationError):
            suggest_threshold([SweepPoint(0.5, 0.0, 50.0), SweepPoint(0.4, 50.0, 60.0)])


class TestExportThresholds:
    def test_consensus_fragment(self):
        fragment = export_thresholds({"consensus": 0.045})
        assert fragment == {"post_removal": {"consensus_threshold": 0.045}}

    def test_merge_idempotent(self):
        fragment = export_thresholds({"consensus": 0.07, "abnormality": 0.3})
        config = PipelineConfig()
        once = merge_fragment(config, fragment)
        twice = merge_fragment(once, fragment)
        assert once.to_dict() == twice.to_dict()
        assert once.post_removal.consensus_threshold == 0.07
        assert once.pre_removal.abnormality_threshold == 0.3

    def test_fragment_round_trips_through_config_parser(self, tmp_path):
        from addpipe.config import load_config, save_config

        merged = merge_fragment(PipelineConfig(), export_thresholds({"mm_clip": 0.33}))
        path = tmp_path / "config.yaml"
        save_config(merged, path)
        assert load_config(path).post_removal.mm_threshold == 0.33

    def test_unknown_filter_rejected(self):
        with pytest.raises(CalibrationError):
            export_thresholds({"sharpness": 0.5})

    def test_empty_suggestions_rejected(self):
        with pytest.raises(CalibrationError):
            export_thresholds({})


class TestSampleCandidates:
    def test_uniform_sample_deterministic(self):
        keys = [(f"p{i}", 0) for i in range(50)]
        a = sample_candidates(keys, 10, seed=3)
        b = sample_candidates(keys, 10, seed=3)
        assert a == b and len(a) == 10

    def test_sample_larger_than_population_returns_all(self):
        keys = [(f"p{i}", 0) for i in range(5)]
        assert sample_candidates(keys, 10, seed=0) == keys

    def test_stratified_respects_groups(self):
        keys = [(f"a{i}", 0) for i in range(40)] + [(f"b{i}", 0) for i in range(10)]
        strata = {k: k[0][0] for k in keys}
        picked = sample_candidates(keys, 10, seed=1, strata=strata)
        a_count = sum(1 for k in picked if k[0].startswith("a"))
        assert len(picked) == 10
        assert a_count == 8  # proportional allocation 40:10 -> 8:2
