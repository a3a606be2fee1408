"""Probe-versus-template scoring and equal error rate estimation.

A comparison score is the number of match pairs left after the configured
post-filter (zero when the filter rejects the image), aggregated over the
template members by max, sum or mean.
"""

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from veinmatch.errors import ConfigError, EvaluationError
from veinmatch.models.config import FilterConfig, MatcherConfig, PipelineConfig
from veinmatch.models.enums import Hand, ScoreAggregation
from veinmatch.models.evaluation import CurvePoint, EerResult, Enrollment, Identity, ScoreRecord, Template
from veinmatch.models.features import FeatureSet
from veinmatch.models.filtering import FilterOutcome
from veinmatch.models.matches import MatchSet
from veinmatch.vision.geomfilter import filter_matches
from veinmatch.vision.matchers import match_features

SCORE_CSV_HEADER = ("probe", "gallery", "genuine", "score")


class MatchPipeline:
    """Matcher plus post-filter plus member aggregation."""

    def __init__(
        self,
        matcher: MatcherConfig | None = None,
        filter_config: FilterConfig | None = None,
        aggregation: ScoreAggregation = ScoreAggregation.MAX,
    ) -> None:
        self.matcher = matcher or MatcherConfig()
        self.filter_config = filter_config or FilterConfig()
        self.aggregation = aggregation

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "MatchPipeline":
        return cls(config.matcher, config.filter, config.protocol.aggregation)

    def compare(self, query: FeatureSet, gallery: FeatureSet) -> FilterOutcome:
        return self.filter(match_features(query, gallery, self.matcher), query, gallery)

    def filter(self, matches: MatchSet, query: FeatureSet, gallery: FeatureSet) -> FilterOutcome:
        return filter_matches(matches, query, gallery, self.filter_config)

    def aggregate(self, member_scores: list[int]) -> float:
        match self.aggregation:
            case ScoreAggregation.MAX:
                return float(max(member_scores))
            case ScoreAggregation.SUM:
                return float(sum(member_scores))
            case ScoreAggregation.MEAN:
                return sum(member_scores) / len(member_scores)
        raise ConfigError(f"unknown score aggregation: {self.aggregation}")


def member_scores(
    probe: FeatureSet,
    template: Template,
    pipelines: Sequence[MatchPipeline],
) -> list[list[int]]:
    """Filtered match count of every template member, one list per pipeline.

    Pipelines with equal matcher settings share one matching pass per member.

    Args:
        probe: Features of the probe sample.
        template: Gallery template whose members are compared in order.
        pipelines: Pipelines to score with; usually differing only in the filter.

    Returns:
        ``counts[i][j]`` is the score of member ``j`` under ``pipelines[i]``.
    """
    counts: list[list[int]] = [[] for _ in pipelines]
    for member in template.members:
        matched: list[tuple[MatcherConfig, MatchSet]] = []
        for pipeline, row in zip(pipelines, counts):
            matches = next((m for config, m in matched if config == pipeline.matcher), None)
            if matches is None:
                matches = match_features(probe, member, pipeline.matcher)
                matched.append((pipeline.matcher, matches))
            row.append(pipeline.filter(matches, probe, member).score)
    return counts


def score_probe(probe: FeatureSet, template: Template, pipeline: MatchPipeline) -> float:
    """Aggregate of per-member filtered match counts; empty feature sets score 0."""
    return pipeline.aggregate(member_scores(probe, template, [pipeline])[0])


def comparable(probe: Identity, gallery: Identity, cross_hand: bool = False) -> bool:
    """Same-hand comparisons only; with ``cross_hand`` a subject's other hand is still excluded."""
    if cross_hand:
        return probe == gallery or probe.subject_id != gallery.subject_id
    return probe.hand == gallery.hand


def comparison_plan(enrollments: list[Enrollment], cross_hand: bool = False) -> list[tuple[int, int, int]]:
    """(probe enrollment, probe position, template enrollment) triples in a fixed order."""
    plan = []
    for p, probe_enrollment in enumerate(enrollments):
        for position in range(len(probe_enrollment.probes)):
            for g, gallery_enrollment in enumerate(enrollments):
                if comparable(probe_enrollment.template.identity, gallery_enrollment.template.identity, cross_hand):
                    plan.append((p, position, g))
    return plan


def score_comparison_members(
    enrollments: list[Enrollment],
    step: tuple[int, int, int],
    pipelines: Sequence[MatchPipeline],
) -> tuple[ScoreRecord, list[list[int]]]:
    """The record for one planned comparison plus its ``member_scores``.

    The record carries the first pipeline's aggregate over the full template.
    """
    p, position, g = step
    probe = enrollments[p].probes[position]
    template = enrollments[g].template
    counts = member_scores(probe.features, template, pipelines)
    record = ScoreRecord(
        probe_id=probe.sample_id,
        probe_identity=probe.identity.key,
        gallery_identity=template.identity.key,
        score=pipelines[0].aggregate(counts[0]),
        genuine=probe.identity == template.identity,
    )
    return record, counts


def score_comparison(
    enrollments: list[Enrollment],
    step: tuple[int, int, int],
    pipeline: MatchPipeline,
) -> ScoreRecord:
    return score_comparison_members(enrollments, step, [pipeline])[0]


def run_scoring(
    enrollments: list[Enrollment],
    pipeline: MatchPipeline,
    cross_hand: bool = False,
) -> list[ScoreRecord]:
    """Every probe against every comparable template, sorted by (probe, gallery)."""
    records = [score_comparison(enrollments, step, pipeline) for step in comparison_plan(enrollments, cross_hand)]
    return sorted(records, key=ScoreRecord.sort_key)


def error_rates(genuine: np.ndarray, impostor: np.ndarray, thresholds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """FAR(t) = impostors scoring >= t; FRR(t) = genuines scoring < t; both as fractions."""
    genuine, impostor = np.sort(genuine), np.sort(impostor)
    far = (len(impostor) - np.searchsorted(impostor, thresholds, side="left")) / len(impostor)
    frr = np.searchsorted(genuine, thresholds, side="left") / len(genuine)
    return far, frr


def compute_eer(records: list[ScoreRecord]) -> EerResult:
    """Sweep the observed scores (plus one past the maximum) for the FAR/FRR crossing.

    At the first threshold where FAR no longer exceeds FRR the EER is FAR
    there if the two meet exactly, otherwise the linear interpolation with
    the previous threshold.
    """
    genuine = np.array([r.score for r in records if r.genuine], dtype=np.float64)
    impostor = np.array([r.score for r in records if not r.genuine], dtype=np.float64)
    if genuine.size == 0 or impostor.size == 0:
        raise EvaluationError(
            f"EER needs genuine and impostor scores, got {genuine.size} genuine and {impostor.size} impostor"
        )

    observed = np.unique(np.concatenate([genuine, impostor]))
    thresholds = np.append(observed, observed[-1] + 1.0)
    far, frr = error_rates(genuine, impostor, thresholds)
    crossing = int(np.flatnonzero(far - frr <= 0)[0])

    far_j, frr_j = float(far[crossing]), float(frr[crossing])
    if far_j == frr_j:
        eer, threshold = far_j, float(thresholds[crossing])
    else:
        far_i, frr_i = float(far[crossing - 1]), float(frr[crossing - 1])
        gap_before = far_i - frr_i
        gap_after = far_j - frr_j
        alpha = gap_before / (gap_before - gap_after)
        eer = far_i + alpha * (far_j - far_i)
        t_i, t_j = float(thresholds[crossing - 1]), float(thresholds[crossing])
        threshold = t_i + alpha * (t_j - t_i)

    return EerResult(
        eer=min(max(eer, 0.0), 1.0),
        threshold_at_eer=threshold,
        far_curve=[CurvePoint(threshold=float(t), rate=float(rate)) for t, rate in zip(thresholds, far)],
        frr_curve=[CurvePoint(threshold=float(t), rate=float(rate)) for t, rate in zip(thresholds, frr)],
        n_genuine=int(genuine.size),
        n_impostor=int(impostor.size),
    )


def probe_hand(record: ScoreRecord) -> Hand:
    return Hand(record.probe_identity.rsplit("_", 1)[1])


def eer_by_hand(records: list[ScoreRecord]) -> dict[Hand, EerResult]:
    """EER restricted to left-hand and to right-hand probes; hands without both classes are omitted."""
    results = {}
    for hand in Hand:
        subset = [record for record in records if probe_hand(record) is hand]
        if any(r.genuine for r in subset) and any(not r.genuine for r in subset):
            results[hand] = compute_eer(subset)
    return results


def write_scores_csv(records: list[ScoreRecord], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SCORE_CSV_HEADER)
        for record in records:
            writer.writerow(
                [record.probe_id, record.gallery_identity, "true" if record.genuine else "false", repr(record.score)]
            )
