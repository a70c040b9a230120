"""Human-in-the-loop threshold calibration: annotation log, sweeps, plateau suggestion.

Mirrors the methodology used to pick the shipped filter defaults: label
removal candidates success/failure, sweep each filter's threshold, plot
retained-success against filtered share, and read off the plateau point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import CalibrationError

SUCCESS, FAILURE = "success", "failure"

# threshold key -> (config section, config key)
FILTER_CONFIG_KEYS = {
    "consensus": ("post_removal", "consensus_threshold"),
    "mm_clip": ("post_removal", "mm_threshold"),
    "importance": ("post_removal", "importance_threshold"),
    "abnormality": ("pre_removal", "abnormality_threshold"),
}

# whether the filter removes candidates scoring above or below the threshold
FILTER_ORIENTATION = {
    "consensus": "filter-high",
    "mm_clip": "filter-high",
    "importance": "filter-high",
    "abnormality": "filter-low",
}

CandidateKey = tuple[str, int]


@dataclass(frozen=True)
class Annotation:
    candidate_key: CandidateKey
    label: str
    annotator_id: str
    created_seq: int

    def to_dict(self) -> dict:
        return {
            "pair_id": self.candidate_key[0],
            "candidate_index": self.candidate_key[1],
            "label": self.label,
            "annotator_id": self.annotator_id,
            "created_seq": self.created_seq,
        }


class AnnotationStore:
    """Append-only annotation log; the latest label per (candidate, annotator) wins.

    Replaying the log file reproduces the store state exactly.
    """

    def __init__(self, log_path, known_candidates: set[CandidateKey] | None = None):
        self.log_path = Path(log_path)
        self.known_candidates = known_candidates
        self._latest: dict[tuple[CandidateKey, str], Annotation] = {}
        self._seq = 0
        if self.log_path.exists():
            self._replay()

    def _replay(self) -> None:
        for line in self.log_path.read_text().splitlines():
            if not line.strip():
                continue
            row = json.loads(line)
            annotation = Annotation(
                candidate_key=(row["pair_id"], int(row["candidate_index"])),
                label=row["label"],
                annotator_id=row["annotator_id"],
                created_seq=int(row["created_seq"]),
            )
            self._absorb(annotation)

    def _absorb(self, annotation: Annotation) -> None:
        key = (annotation.candidate_key, annotation.annotator_id)
        current = self._latest.get(key)
        if current is None or annotation.created_seq > current.created_seq:
            self._latest[key] = annotation
        self._seq = max(self._seq, annotation.created_seq)

    @property
    def last_seq(self) -> int:
        return self._seq

    def record(self, candidate_key: CandidateKey, label: str, annotator_id: str) -> Annotation:
        if label not in (SUCCESS, FAILURE):
            raise CalibrationError(f"label must be '{SUCCESS}' or '{FAILURE}', got '{label}'")
        if self.known_candidates is not None and candidate_key not in self.known_candidates:
            raise CalibrationError(f"unknown candidate {candidate_key}")
        self._seq += 1
        annotation = Annotation(candidate_key, label, annotator_id, self._seq)
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        with self.log_path.open("a") as fh:
            fh.write(json.dumps(annotation.to_dict(), sort_keys=True) + "\n")
        self._absorb(annotation)
        return annotation

    def effective_labels(self) -> dict[CandidateKey, str]:
        """Majority vote across annotators' latest labels; ties resolve to failure."""
        votes: dict[CandidateKey, list[str]] = {}
        for (candidate_key, _), annotation in self._latest.items():
            votes.setdefault(candidate_key, []).append(annotation.label)
        labels = {}
        for candidate_key, cast in votes.items():
            successes = sum(1 for v in cast if v == SUCCESS)
            failures = len(cast) - successes
            labels[candidate_key] = SUCCESS if successes > failures else FAILURE
        return labels

    def annotation_for(self, candidate_key: CandidateKey, annotator_id: str) -> Annotation | None:
        return self._latest.get((candidate_key, annotator_id))


def record_annotation(store: AnnotationStore, candidate_key: CandidateKey, label: str, annotator_id: str) -> Annotation:
    return store.record(candidate_key, label, annotator_id)


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    filtered_pct: float
    success_pct_retained: float | None


def _tenth(value: Fraction) -> float:
    """Deterministic half-up rounding to 0.1."""
    return float((value * 10 + Fraction(1, 2)).__floor__()) / 10.0


def sweep_threshold(
    annotations: dict[CandidateKey, str],
    scores: dict[CandidateKey, float],
    thresholds: list[float],
    orientation: str,
) -> list[SweepPoint]:
    """Per threshold: share of candidates the filter removes, and the retained success rate.

    Exact rational arithmetic on counts, rendered to 0.1%. A threshold that
    filters everything reports a null success rate.
    """
    if not annotations:
        raise CalibrationError("annotation set is empty")
    if orientation not in ("filter-high", "filter-low"):
        raise CalibrationError(f"unknown orientation '{orientation}'")
    missing = [key for key in annotations if key not in scores]
    if missing:
        raise CalibrationError(f"{len(missing)} annotated candidates lack scores (first: {missing[0]})")

    total = len(annotations)
    points = []
    for threshold in thresholds:
        retained = []
        for key, label in annotations.items():
            score = scores[key]
            removed = score > threshold if orientation == "filter-high" else score < threshold
            if not removed:
                retained.append(label)
        filtered_pct = _tenth(Fraction(total - len(retained), total) * 100)
        if retained:
            successes = sum(1 for label in retained if label == SUCCESS)
            success_pct = _tenth(Fraction(successes, len(retained)) * 100)
        else:
            success_pct = None
        points.append(SweepPoint(threshold=float(threshold), filtered_pct=filtered_pct, success_pct_retained=success_pct))
    return points


@dataclass(frozen=True)
class SuggestResult:
    threshold: float
    no_plateau: bool = False


def suggest_threshold(curve: list[SweepPoint], epsilon: float = 0.05) -> SuggestResult:
    """Smallest-filtering threshold where the forward success/filtered slope plateaus.

    The slope must fall below epsilon and stay below for every later point;
    otherwise the last point's threshold is returned with a no-plateau flag.
    """
    usable = [p for p in curve if p.success_pct_retained is not None]
    if len(usable) < 3:
        raise CalibrationError("plateau suggestion needs at least 3 sweep points")
    usable = sorted(usable, key=lambda p: p.filtered_pct)

    slopes = []
    for current, following in zip(usable, usable[1:]):
        d_filtered = following.filtered_pct - current.filtered_pct
        d_success = following.success_pct_retained - current.success_pct_retained
        if d_filtered == 0:
            slopes.append(0.0 if d_success == 0 else float("inf"))
        else:
            slopes.append(d_success / d_filtered)

    for i in range(len(slopes)):
        if all(slope < epsilon for slope in slopes[i:]):
            return SuggestResult(threshold=usable[i].threshold)
    return SuggestResult(threshold=usable[-1].threshold, no_plateau=True)


def export_thresholds(suggestions: dict[str, float]) -> dict:
    """Turn per-filter threshold suggestions into a mergeable config fragment."""
    if not suggestions:
        raise CalibrationError("need at least one filter suggestion")
    fragment: dict = {}
    for filter_name, threshold in suggestions.items():
        if filter_name not in FILTER_CONFIG_KEYS:
            raise CalibrationError(f"unknown filter '{filter_name}'")
        section, key = FILTER_CONFIG_KEYS[filter_name]
        fragment.setdefault(section, {})[key] = float(threshold)
    return fragment


def sample_candidates(
    keys: list[CandidateKey],
    n: int,
    seed: int = 0,
    strata: dict[CandidateKey, str] | None = None,
) -> list[CandidateKey]:
    """Pick candidates to annotate: uniform without replacement, optionally stratified."""
    rng = np.random.default_rng(seed)
    if n >= len(keys):
        return list(keys)
    if not strata:
        chosen = rng.choice(len(keys), size=n, replace=False)
        return [keys[i] for i in sorted(chosen)]
    groups: dict[str, list[CandidateKey]] = {}
    for key in keys:
        groups.setdefault(strata.get(key, ""), []).append(key)
    picked: list[CandidateKey] = []
    names = sorted(groups)
    quota = {name: int(n * len(groups[name]) / len(keys)) for name in names}
    leftover = n - sum(quota.values())
    for name in names[:leftover]:
        quota[name] += 1
    for name in names:
        group = groups[name]
        take = min(quota[name], len(group))
        chosen = rng.choice(len(group), size=take, replace=False)
        picked.extend(group[i] for i in sorted(chosen))
    return picked[:n]
