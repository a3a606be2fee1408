"""Unit tests for comparison scoring and EER estimation."""

from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from veinmatch.errors import EvaluationError
from veinmatch.models.config import FilterConfig, MatcherConfig, PipelineConfig
from veinmatch.models.enums import FilterKind, Hand, ScoreAggregation
from veinmatch.models.evaluation import Enrollment, Identity, Sample, ScoreRecord, Template
from veinmatch.models.features import DESCRIPTOR_LENGTH, FeatureSet, Keypoint
from veinmatch.models.matches import MatchSet
from veinmatch.services import scoring
from veinmatch.services.scoring import (
    MatchPipeline,
    comparable,
    comparison_plan,
    compute_eer,
    eer_by_hand,
    member_scores,
    run_scoring,
    score_comparison,
    score_comparison_members,
    score_probe,
    write_scores_csv,
)

CLOSE_ONLY = MatcherConfig(max_distance=0.5)
NONE_AND_MMD = (FilterKind.NONE, FilterKind.MMD)


def _unit_rows(rng: np.random.Generator, n: int) -> np.ndarray:
    vectors = rng.normal(size=(n, DESCRIPTOR_LENGTH))
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)


def _make_features(descriptors: np.ndarray, source_id: str, points: np.ndarray | None = None) -> FeatureSet:
    if points is None:
        points = np.column_stack([10.0 + 5.0 * np.arange(len(descriptors)), 20.0 + 3.0 * np.arange(len(descriptors))])
    keypoints = [Keypoint(x=float(x), y=float(y), scale=1.6) for x, y in points]
    return FeatureSet(source_id=source_id, keypoints=keypoints, descriptors=descriptors)


def _make_enrollments(identities: list[Identity], n_probes: int = 3, n_keypoints: int = 8) -> list[Enrollment]:
    """One single-member template per identity; probes repeat the template's descriptors."""
    rng = np.random.default_rng(0)
    enrollments = []
    for identity in identities:
        descriptors = _unit_rows(rng, n_keypoints)
        template = Template(identity=identity, members=[_make_features(descriptors, f"{identity.key}_01")])
        probes = [
            Sample(identity=identity, sample_index=index, features=_make_features(descriptors, f"{identity.key}_p"))
            for index in range(2, 2 + n_probes)
        ]
        enrollments.append(Enrollment(template=template, probes=probes))
    return enrollments


def _record(score: float, genuine: bool, probe_identity: str = "001_left") -> ScoreRecord:
    return ScoreRecord(
        probe_id=f"{probe_identity}_02",
        probe_identity=probe_identity,
        gallery_identity=probe_identity if genuine else "999_left",
        score=score,
        genuine=genuine,
    )


def _records(genuine: list[float], impostor: list[float], probe_identity: str = "001_left") -> list[ScoreRecord]:
    return [_record(s, True, probe_identity) for s in genuine] + [_record(s, False, probe_identity) for s in impostor]


def _eer_oracle(genuine: list[float], impostor: list[float]) -> float:
    thresholds = sorted(set(genuine) | set(impostor))
    thresholds.append(thresholds[-1] + 1.0)
    far = [sum(s >= t for s in impostor) / len(impostor) for t in thresholds]
    frr = [sum(s < t for s in genuine) / len(genuine) for t in thresholds]
    for j in range(len(thresholds)):
        if far[j] - frr[j] <= 0:
            if far[j] == frr[j]:
                return far[j]
            before, after = far[j - 1] - frr[j - 1], far[j] - frr[j]
            return far[j - 1] + before / (before - after) * (far[j] - far[j - 1])
    raise AssertionError("FAR and FRR never cross")


class TestMatchPipeline:
    """Tests for single comparisons and member aggregation."""

    def test_self_match_scores_every_keypoint(self) -> None:
        features = _make_features(_unit_rows(np.random.default_rng(1), 12), "p")

        assert MatchPipeline().compare(features, features).score == 12

    def test_mmd_rejection_scores_zero(self) -> None:
        descriptors = _unit_rows(np.random.default_rng(2), 3)
        query_points = np.array([[100.0, 200.0], [107.0, 203.0], [114.0, 206.0]])
        offsets = np.array([[10.0, 10.0], [50.0, 50.0], [60.0, 60.0]])
        query = _make_features(descriptors, "q", query_points)
        gallery = _make_features(descriptors, "g", query_points + offsets)
        pipeline = MatchPipeline(filter_config=FilterConfig(kind=FilterKind.MMD))

        outcome = pipeline.compare(query, gallery)

        assert not outcome.image_accepted
        assert outcome.score == 0

    @pytest.mark.parametrize(
        ("aggregation", "expected"),
        [(ScoreAggregation.MAX, 9.0), (ScoreAggregation.SUM, 14.0), (ScoreAggregation.MEAN, 7.0)],
    )
    def test_aggregation(self, aggregation: ScoreAggregation, expected: float) -> None:
        rng = np.random.default_rng(3)
        probe_rows = _unit_rows(rng, 12)
        first = _make_features(np.vstack([probe_rows[:5], _unit_rows(rng, 5)]), "m1")
        second = _make_features(np.vstack([probe_rows[:9], _unit_rows(rng, 3)]), "m2")
        template = Template(identity=Identity(subject_id="001", hand=Hand.LEFT), members=[first, second])
        pipeline = MatchPipeline(matcher=CLOSE_ONLY, aggregation=aggregation)

        assert score_probe(_make_features(probe_rows, "p"), template, pipeline) == expected

    def test_empty_probe_scores_zero(self) -> None:
        template = Template(
            identity=Identity(subject_id="001", hand=Hand.LEFT),
            members=[_make_features(_unit_rows(np.random.default_rng(4), 4), "m")],
        )

        assert score_probe(FeatureSet(source_id="empty"), template, MatchPipeline()) == 0.0

    def test_member_scores_agree_with_single_comparisons(self) -> None:
        rng = np.random.default_rng(5)
        query_rows = _unit_rows(rng, 10)
        members = [_make_features(np.vstack([query_rows[:k], _unit_rows(rng, 10 - k)]), f"m{k}") for k in (4, 7)]
        template = Template(identity=Identity(subject_id="001", hand=Hand.LEFT), members=members)
        query = _make_features(query_rows, "p")
        pipelines = [MatchPipeline(matcher=CLOSE_ONLY, filter_config=FilterConfig(kind=kind)) for kind in NONE_AND_MMD]

        counts = member_scores(query, template, pipelines)

        assert counts == [[pipeline.compare(query, member).score for member in members] for pipeline in pipelines]
        assert counts[0] == [4, 7]

    def test_member_scores_match_once_per_matcher(self, monkeypatch: pytest.MonkeyPatch) -> None:
        calls: list[MatcherConfig] = []
        original = scoring.match_features

        def _counting(query: FeatureSet, gallery: FeatureSet, config: MatcherConfig) -> MatchSet:
            calls.append(config)
            return original(query, gallery, config)

        monkeypatch.setattr(scoring, "match_features", _counting)
        rows = _unit_rows(np.random.default_rng(6), 6)
        template = Template(
            identity=Identity(subject_id="001", hand=Hand.LEFT),
            members=[_make_features(rows, "m1"), _make_features(rows, "m2")],
        )
        pipelines = [
            MatchPipeline(matcher=CLOSE_ONLY),
            MatchPipeline(matcher=CLOSE_ONLY, filter_config=FilterConfig(kind=FilterKind.MMD)),
            MatchPipeline(),
        ]

        member_scores(_make_features(rows, "p"), template, pipelines)

        assert calls == [CLOSE_ONLY, MatcherConfig(), CLOSE_ONLY, MatcherConfig()]

    def test_from_config(self) -> None:
        config = PipelineConfig.from_flat({"filter.kind": "mmd", "protocol.aggregation": "sum"})

        pipeline = MatchPipeline.from_config(config)

        assert pipeline.filter_config.kind is FilterKind.MMD
        assert pipeline.aggregation is ScoreAggregation.SUM


class TestComparisonPlan:
    """Tests for which probe-template pairs get scored."""

    def test_comparable_rules(self) -> None:
        left = Identity(subject_id="001", hand=Hand.LEFT)
        right = Identity(subject_id="001", hand=Hand.RIGHT)
        other_right = Identity(subject_id="002", hand=Hand.RIGHT)

        assert comparable(left, left)
        assert not comparable(left, right)
        assert not comparable(left, other_right)
        assert not comparable(left, right, cross_hand=True)
        assert comparable(left, other_right, cross_hand=True)

    def test_same_hand_counts(self) -> None:
        identities = [Identity(subject_id=f"{i:03d}", hand=Hand.RIGHT) for i in range(1, 9)]

        records = run_scoring(_make_enrollments(identities), MatchPipeline(matcher=CLOSE_ONLY))

        assert len(records) == 192
        assert sum(record.genuine for record in records) == 24
        assert records == sorted(records, key=ScoreRecord.sort_key)

    def test_mixed_hands(self) -> None:
        identities = [Identity(subject_id=f"{i:03d}", hand=hand) for i in range(1, 5) for hand in Hand]
        enrollments = _make_enrollments(identities)

        assert len(comparison_plan(enrollments)) == 96
        assert len(comparison_plan(enrollments, cross_hand=True)) == 168

    def test_genuine_and_impostor_scores_separate(self) -> None:
        identities = [Identity(subject_id=f"{i:03d}", hand=Hand.LEFT) for i in range(1, 5)]

        records = run_scoring(_make_enrollments(identities, n_keypoints=8), MatchPipeline(matcher=CLOSE_ONLY))

        assert {r.score for r in records if r.genuine} == {8.0}
        assert {r.score for r in records if not r.genuine} == {0.0}
        assert compute_eer(records).eer == 0.0

    def test_member_records_carry_full_template_score(self) -> None:
        identities = [Identity(subject_id=f"{i:03d}", hand=Hand.LEFT) for i in range(1, 4)]
        enrollments = _make_enrollments(identities)
        pipelines = [MatchPipeline(matcher=CLOSE_ONLY), MatchPipeline(filter_config=FilterConfig(kind=FilterKind.MMD))]

        for step in comparison_plan(enrollments):
            record, counts = score_comparison_members(enrollments, step, pipelines)

            assert record == score_comparison(enrollments, step, pipelines[0])
            assert len(counts) == 2
            assert record.score == max(counts[0])


class TestComputeEer:
    """Tests for the FAR/FRR crossing."""

    def test_exact_crossing(self) -> None:
        result = compute_eer(_records([8.0, 6.0, 4.0], [5.0, 3.0, 1.0]))

        assert result.eer == pytest.approx(1 / 3)
        assert result.threshold_at_eer == 5.0
        assert (result.n_genuine, result.n_impostor) == (3, 3)

    def test_interpolated_crossing(self) -> None:
        result = compute_eer(_records([2.0], [1.0, 2.0, 3.0]))

        assert result.eer == pytest.approx(0.5)
        assert result.threshold_at_eer == pytest.approx(2.5)

    def test_perfect_separation(self) -> None:
        assert compute_eer(_records([10.0, 9.0], [1.0, 2.0])).eer == 0.0

    def test_inverted_scores(self) -> None:
        assert compute_eer(_records([1.0, 2.0], [9.0, 10.0])).eer == 1.0

    def test_curve_endpoints(self) -> None:
        result = compute_eer(_records([8.0, 6.0, 4.0], [5.0, 3.0, 1.0]))

        assert (result.far_curve[0].rate, result.frr_curve[0].rate) == (1.0, 0.0)
        assert (result.far_curve[-1].rate, result.frr_curve[-1].rate) == (0.0, 1.0)
        assert result.far_curve[-1].threshold == 9.0

    @pytest.mark.parametrize(("genuine", "impostor"), [([], [1.0]), ([1.0], [])])
    def test_missing_class(self, genuine: list[float], impostor: list[float]) -> None:
        with pytest.raises(EvaluationError):
            compute_eer(_records(genuine, impostor))

    def test_matches_oracle_on_random_lists(self) -> None:
        rng = np.random.default_rng(5)
        genuine = rng.integers(5, 40, size=250).astype(float).tolist()
        impostor = rng.integers(0, 20, size=250).astype(float).tolist()

        assert compute_eer(_records(genuine, impostor)).eer == pytest.approx(_eer_oracle(genuine, impostor))

    @pytest.mark.slow
    def test_matches_oracle_on_500_seeded_lists(self) -> None:
        rng = np.random.default_rng(8)
        for _ in range(500):
            n_genuine, n_impostor = rng.integers(1, 60, size=2)
            offset = int(rng.integers(0, 15))
            if rng.random() < 0.5:
                genuine = rng.integers(offset, offset + 30, size=n_genuine).astype(float).tolist()
                impostor = rng.integers(0, 25, size=n_impostor).astype(float).tolist()
            else:
                genuine = np.round(rng.uniform(offset, offset + 30, size=n_genuine), 2).tolist()
                impostor = np.round(rng.uniform(0, 25, size=n_impostor), 2).tolist()

            result = compute_eer(_records(genuine, impostor))

            assert result.eer == pytest.approx(_eer_oracle(genuine, impostor), abs=1e-12)
            assert 0.0 <= result.eer <= 1.0

    @settings(max_examples=50, deadline=None)
    @given(
        genuine=st.lists(st.integers(0, 30), min_size=1, max_size=20),
        impostor=st.lists(st.integers(0, 30), min_size=1, max_size=20),
        shift=st.integers(1, 100),
    )
    def test_shift_invariance(self, genuine: list[int], impostor: list[int], shift: int) -> None:
        base = compute_eer(_records([float(s) for s in genuine], [float(s) for s in impostor]))
        shifted = compute_eer(_records([float(s + shift) for s in genuine], [float(s + shift) for s in impostor]))

        assert shifted.eer == pytest.approx(base.eer)
        assert shifted.threshold_at_eer == pytest.approx(base.threshold_at_eer + shift)


class TestEerByHand:
    """Tests for the per-hand breakdown."""

    def test_hands_scored_separately(self) -> None:
        records = _records([8.0, 6.0, 4.0], [5.0, 3.0, 1.0], "001_left") + _records([9.0], [1.0], "002_right")

        results = eer_by_hand(records)

        assert results[Hand.LEFT].eer == pytest.approx(1 / 3)
        assert results[Hand.RIGHT].eer == 0.0

    def test_hand_without_impostors_is_omitted(self) -> None:
        records = _records([8.0], [1.0], "001_left") + _records([9.0], [], "002_right")

        assert set(eer_by_hand(records)) == {Hand.LEFT}


class TestWriteScoresCsv:
    """Tests for the score dump."""

    def test_rows(self, tmp_path: Path) -> None:
        path = tmp_path / "out" / "scores.csv"

        write_scores_csv([_record(5.0, True), _record(0.0, False)], path)

        assert path.read_text().splitlines() == [
            "probe,gallery,genuine,score",
            "001_left_02,001_left,true,5.0",
            "001_left_02,999_left,false,0.0",
        ]
