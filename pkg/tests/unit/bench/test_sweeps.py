"""Unit tests for the threshold, rotation and ratio sweeps."""

from pathlib import Path

import numpy as np
import pytest

from veinmatch.bench.sweeps import (
    ANGLES,
    THRESHOLDS,
    SweepRunner,
    ratio_sweep,
    read_sweep_csv,
    restore_failures,
    rotation_violations,
    scene_sweep_rows,
    sweep_grid,
    threshold_violations,
    write_ratio_csv,
    write_sweep_csv,
)
from veinmatch.errors import ParameterError
from veinmatch.models.enums import SweepKind
from veinmatch.models.features import DESCRIPTOR_LENGTH, FeatureSet, Keypoint
from veinmatch.models.synthetic import SweepRow


def _make_row(seed: int = 0, angle: float = 0.0, threshold: float = 10.0, recall: float = 1.0, survivors: int = 5):
    return SweepRow(
        seed=seed,
        angle=angle,
        threshold=threshold,
        precision=1.0,
        recall=recall,
        survivors=survivors,
        accepted=True,
    )


def _make_features(n: int, seed: int, source_id: str) -> FeatureSet:
    rng = np.random.default_rng(seed)
    vectors = rng.normal(size=(n, DESCRIPTOR_LENGTH))
    points = rng.uniform(0.0, 200.0, size=(n, 2))
    keypoints = [Keypoint(x=float(x), y=float(y), scale=1.6) for x, y in points]
    return FeatureSet(
        source_id=source_id,
        keypoints=keypoints,
        descriptors=vectors / np.linalg.norm(vectors, axis=1, keepdims=True),
    )


class TestSceneSweepRows:
    """Tests for one seed's sweep grid."""

    def test_grid_shape(self) -> None:
        rows = scene_sweep_rows(seed=1)

        assert len(rows) == len(ANGLES) * len(THRESHOLDS)
        assert {row.angle for row in rows} == set(ANGLES)
        assert {row.threshold for row in rows} == set(THRESHOLDS)

    def test_survivors_monotone_in_threshold(self) -> None:
        rows = scene_sweep_rows(seed=2)

        assert threshold_violations(rows) == 0

    def test_is_deterministic(self) -> None:
        assert scene_sweep_rows(seed=3) == scene_sweep_rows(seed=3)


class TestSweepGrid:
    """Tests for sweep kind dispatch."""

    def test_threshold_sweep_has_single_angle(self) -> None:
        angles, thresholds = sweep_grid(SweepKind.THRESHOLD)

        assert angles == (0.0,)
        assert thresholds == THRESHOLDS

    def test_ratio_sweep_is_not_a_scene_sweep(self) -> None:
        with pytest.raises(ParameterError):
            sweep_grid(SweepKind.RATIO)


class TestViolationCounters:
    """Tests for the monotonicity counters on hand-built rows."""

    def test_threshold_violation_counted(self) -> None:
        rows = [_make_row(threshold=10.0, survivors=5), _make_row(threshold=15.0, survivors=4)]

        assert threshold_violations(rows) == 1

    def test_rotation_violation_counted(self) -> None:
        rows = [_make_row(angle=0.0, recall=0.8), _make_row(angle=2.0, recall=0.9), _make_row(angle=4.0, recall=0.5)]

        assert rotation_violations(rows) == 1
        assert rotation_violations(rows, threshold=99.0) == 0

    def test_restore_failure_counted(self) -> None:
        rows = [
            _make_row(angle=0.0, threshold=10.0, recall=1.0),
            _make_row(angle=8.0, threshold=10.0, recall=0.2),
            _make_row(angle=8.0, threshold=35.0, recall=0.9),
        ]

        assert restore_failures(rows) == 1
        assert restore_failures(rows[:2] + [_make_row(angle=8.0, threshold=35.0, recall=1.0)]) == 0


class TestSweepRunner:
    """Tests for the seed fan-out."""

    async def test_rows_are_ordered_and_complete(self) -> None:
        rows = await SweepRunner(max_workers=2).run([2, 0, 1], SweepKind.THRESHOLD)

        assert len(rows) == 3 * len(THRESHOLDS)
        assert rows == sorted(rows, key=SweepRow.sort_key)
        assert rows == scene_sweep_rows(0, (0.0,)) + scene_sweep_rows(1, (0.0,)) + scene_sweep_rows(2, (0.0,))

    @pytest.mark.slow
    async def test_threshold_sweep_over_fifty_scenes(self) -> None:
        rows = await SweepRunner(max_workers=4).run(list(range(50)), SweepKind.THRESHOLD)

        assert threshold_violations(rows) == 0

    @pytest.mark.slow
    async def test_rotation_sweep_over_fifty_scenes(self) -> None:
        rows = await SweepRunner(max_workers=4).run(list(range(50)), SweepKind.ROTATION)

        assert threshold_violations(rows) == 0
        assert rotation_violations(rows) == 0
        assert restore_failures(rows) == 0


class TestSweepCsv:
    """Tests for the sweep CSV files."""

    def test_write_then_read(self, tmp_path: Path) -> None:
        rows = scene_sweep_rows(seed=4, angles=(0.0, 4.0))
        path = tmp_path / "out" / "sweep.csv"

        write_sweep_csv(rows, path)

        assert path.read_text().splitlines()[0] == "seed,angle,threshold,precision,recall,survivors,accepted"
        assert read_sweep_csv(path) == rows


class TestRatioSweep:
    """Tests for the ratio-test sweep over a descriptor pair."""

    def test_matches_grow_with_ratio(self, tmp_path: Path) -> None:
        query, gallery = _make_features(60, 1, "q"), _make_features(60, 2, "g")

        rows = ratio_sweep(query, gallery, ratios=(0.9, 0.5, 0.7))

        assert [row.ratio for row in rows] == [0.5, 0.7, 0.9]
        counts = [row.matches for row in rows]
        assert counts == sorted(counts)
        assert all(row.survivors <= row.matches for row in rows)

        write_ratio_csv(rows, tmp_path / "ratio.csv")
        assert (tmp_path / "ratio.csv").read_text().splitlines()[0] == "ratio,matches,survivors"
