"""Unit tests for overlays and plots."""

from pathlib import Path

import numpy as np

from veinmatch.bench.sweeps import scene_sweep_rows
from veinmatch.models.enums import FilterKind
from veinmatch.models.evaluation import ScoreRecord
from veinmatch.models.features import DESCRIPTOR_LENGTH, FeatureSet, Keypoint
from veinmatch.models.image import GrayImage
from veinmatch.models.matches import MatchPair, MatchSet
from veinmatch.models.report import EvaluationReport, EvaluationRow
from veinmatch.models.synthetic import RatioSweepRow
from veinmatch.services.scoring import compute_eer
from veinmatch.services.visualize import (
    BLANK_LEVEL,
    plot_error_curves,
    plot_ratio_sweep,
    plot_sweep,
    render_match_overlay,
    write_overlay,
)

PNG_MAGIC = b"\x89PNG"


def _make_features(points: list[tuple[float, float]], source_id: str) -> FeatureSet:
    descriptors = np.zeros((len(points), DESCRIPTOR_LENGTH))
    descriptors[:, 0] = 1.0
    return FeatureSet(
        source_id=source_id,
        keypoints=[Keypoint(x=x, y=y, scale=1.6) for x, y in points],
        descriptors=descriptors,
    )


def _make_pair_case() -> tuple[FeatureSet, FeatureSet, MatchSet]:
    query = _make_features([(10.0, 20.0)], "q")
    gallery = _make_features([(10.0, 20.0)], "g")
    matches = MatchSet(query_id="q", gallery_id="g", pairs=[MatchPair(query_idx=0, gallery_idx=0, distance=0.0)])
    return query, gallery, matches


def _make_report() -> EvaluationReport:
    records = [
        ScoreRecord(probe_id=f"p{i}", probe_identity="001_left", gallery_identity=g, score=s, genuine=g == "001_left")
        for i, (g, s) in enumerate([("001_left", 8.0), ("001_left", 6.0), ("002_left", 5.0), ("002_left", 1.0)])
    ]
    row = EvaluationRow(filter=FilterKind.MMD, template_size=1, n_records=len(records), eer=compute_eer(records))
    return EvaluationReport(
        toolkit_version="test",
        config={},
        score_rule="filtered_match_count/max",
        manifest_entries=4,
        dev_identities=[],
        eval_identities=["001_left"],
        probes=2,
        rows=[row],
    )


class TestRenderMatchOverlay:
    """Tests for the side-by-side match drawing."""

    def test_canvas_without_images(self) -> None:
        query, gallery, matches = _make_pair_case()

        canvas = render_match_overlay(query, gallery, matches)

        assert canvas.shape == (28, 36, 3)
        assert canvas[0, 0].tolist() == [BLANK_LEVEL] * 3

    def test_canvas_with_images(self) -> None:
        query, gallery, matches = _make_pair_case()
        image = GrayImage.constant(width=40, height=30, value=0.5)

        canvas = render_match_overlay(query, gallery, matches, query_image=image, gallery_image=image)

        assert canvas.shape == (30, 80, 3)

    def test_survivors_drawn_green_and_rejects_red(self) -> None:
        query, gallery, matches = _make_pair_case()
        empty = matches.with_pairs([])

        accepted = render_match_overlay(query, gallery, matches)[20, 18]
        rejected = render_match_overlay(query, gallery, matches, survivors=empty)[20, 18]

        assert accepted[1] > accepted[2]
        assert rejected[2] > rejected[1]

    def test_rejected_image_draws_every_pair_red(self) -> None:
        points = [(10.0, 10.0), (10.0, 30.0)]
        query, gallery = _make_features(points, "q"), _make_features(points, "g")
        matches = MatchSet(
            query_id="q",
            gallery_id="g",
            pairs=[MatchPair(query_idx=i, gallery_idx=i, distance=0.0) for i in range(2)],
        )

        rejected = render_match_overlay(query, gallery, matches, survivors=matches.with_pairs([]))
        partial = render_match_overlay(query, gallery, matches, survivors=matches.with_pairs(matches.pairs[:1]))

        for row in (10, 30):
            assert rejected[row, 18][2] > rejected[row, 18][1]
        assert partial[10, 18][1] > partial[10, 18][2]
        assert partial[30, 18][2] > partial[30, 18][1]

    def test_write_overlay(self, tmp_path: Path) -> None:
        query, gallery, matches = _make_pair_case()
        path = tmp_path / "out" / "overlay.png"

        write_overlay(path, render_match_overlay(query, gallery, matches))

        assert path.read_bytes()[:4] == PNG_MAGIC


class TestPlots:
    """Tests for the matplotlib figures."""

    def test_plot_sweep(self, tmp_path: Path) -> None:
        path = tmp_path / "sweep.png"

        plot_sweep(scene_sweep_rows(seed=0, angles=(0.0, 4.0)), path)

        assert path.read_bytes()[:4] == PNG_MAGIC

    def test_plot_ratio_sweep(self, tmp_path: Path) -> None:
        rows = [RatioSweepRow(ratio=0.5, matches=3, survivors=1), RatioSweepRow(ratio=0.7, matches=8, survivors=4)]
        path = tmp_path / "ratio.png"

        plot_ratio_sweep(rows, path)

        assert path.read_bytes()[:4] == PNG_MAGIC

    def test_plot_error_curves(self, tmp_path: Path) -> None:
        path = tmp_path / "nested" / "curves.png"

        plot_error_curves(_make_report(), path)

        assert path.read_bytes()[:4] == PNG_MAGIC
