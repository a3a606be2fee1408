"""Threshold, rotation and ratio sweeps over synthetic scenes and feature pairs."""

import asyncio
import csv
import math
import os
from collections import defaultdict
from pathlib import Path

import structlog

from veinmatch.errors import ParameterError
from veinmatch.models.enums import SweepKind
from veinmatch.models.features import FeatureSet
from veinmatch.models.filtering import MmdParams
from veinmatch.models.synthetic import RatioSweepRow, SceneSpec, SweepRow
from veinmatch.bench.scenes import filter_metrics, generate_scene
from veinmatch.vision.geomfilter import mmd_filter
from veinmatch.vision.matchers import match_knn_ratio

THRESHOLDS = (10.0, 15.0, 20.0, 25.0, 30.0, 35.0)
ANGLES = (0.0, 2.0, 4.0, 6.0, 8.0)
RATIOS = (0.5, 0.6, 0.7, 0.8, 0.9)
SWEEP_NOISE_SIGMA = 1.0
SWEEP_INLIER_RADIUS = 200.0


def default_sweep_spec() -> SceneSpec:
    return SceneSpec(n_inliers=30, n_outliers=30, noise_sigma=SWEEP_NOISE_SIGMA, inlier_radius=SWEEP_INLIER_RADIUS)


def scene_sweep_rows(
    seed: int,
    angles: tuple[float, ...] = ANGLES,
    thresholds: tuple[float, ...] = THRESHOLDS,
    base: SceneSpec | None = None,
    mmd: MmdParams | None = None,
) -> list[SweepRow]:
    """MMD metrics for one seed over an angle x common-threshold grid (T_mu = T_D)."""
    base = base or default_sweep_spec()
    mmd = mmd or MmdParams()
    rows = []
    for angle in angles:
        spec = base.model_copy(update={"seed": seed, "rotation": math.radians(angle)})
        scene, matches = generate_scene(spec)
        for threshold in thresholds:
            params = mmd.model_copy(update={"t_mu": threshold, "t_d": threshold})
            decision = mmd_filter(matches, scene.query_points, scene.gallery_points, params)
            metrics = filter_metrics(decision, scene)
            rows.append(
                SweepRow(
                    seed=seed,
                    angle=angle,
                    threshold=threshold,
                    precision=metrics.precision,
                    recall=metrics.recall,
                    survivors=metrics.survivors,
                    accepted=metrics.image_accepted,
                )
            )
    return rows


def sweep_grid(kind: SweepKind) -> tuple[tuple[float, ...], tuple[float, ...]]:
    match kind:
        case SweepKind.THRESHOLD:
            return (0.0,), THRESHOLDS
        case SweepKind.ROTATION:
            return ANGLES, THRESHOLDS
    raise ParameterError(f"sweep kind '{kind}' does not run on synthetic scenes")


class SweepRunner:
    """Fans seeds out over worker threads and returns rows ordered by (seed, angle, threshold)."""

    def __init__(
        self,
        max_workers: int | None = None,
        logger: structlog.stdlib.BoundLogger | None = None,
    ) -> None:
        self._max_workers = max_workers or os.cpu_count() or 1
        self._logger = logger or structlog.get_logger(__name__)

    async def run(
        self,
        seeds: list[int],
        kind: SweepKind = SweepKind.ROTATION,
        base: SceneSpec | None = None,
        mmd: MmdParams | None = None,
    ) -> list[SweepRow]:
        angles, thresholds = sweep_grid(kind)
        semaphore = asyncio.Semaphore(self._max_workers)
        self._logger.info("sweep_started", kind=kind.value, seeds=len(seeds), workers=self._max_workers)

        async def _one(seed: int) -> list[SweepRow]:
            async with semaphore:
                return await asyncio.to_thread(scene_sweep_rows, seed, angles, thresholds, base, mmd)

        batches = await asyncio.gather(*(_one(seed) for seed in seeds))
        rows = sorted((row for batch in batches for row in batch), key=SweepRow.sort_key)
        self._logger.info(
            "sweep_completed",
            kind=kind.value,
            rows=len(rows),
            threshold_violations=threshold_violations(rows),
            rotation_violations=rotation_violations(rows) if len(angles) > 1 else 0,
        )
        return rows


def threshold_violations(rows: list[SweepRow]) -> int:
    """Cells where survivors drop as the common threshold rises, per (seed, angle)."""
    groups: dict[tuple[int, float], list[SweepRow]] = defaultdict(list)
    for row in rows:
        groups[(row.seed, row.angle)].append(row)
    violations = 0
    for group in groups.values():
        ordered = sorted(group, key=lambda row: row.threshold)
        violations += sum(later.survivors < earlier.survivors for earlier, later in zip(ordered, ordered[1:]))
    return violations


def rotation_violations(rows: list[SweepRow], threshold: float | None = None) -> int:
    """Cells where recall rises with rotation at a fixed threshold (all thresholds when None)."""
    groups: dict[tuple[int, float], list[SweepRow]] = defaultdict(list)
    for row in rows:
        if threshold is None or row.threshold == threshold:
            groups[(row.seed, row.threshold)].append(row)
    violations = 0
    for group in groups.values():
        ordered = sorted(group, key=lambda row: row.angle)
        violations += sum(later.recall > earlier.recall for earlier, later in zip(ordered, ordered[1:]))
    return violations


def restore_failures(rows: list[SweepRow]) -> int:
    """Angles for which no threshold restores the recall seen at 0 degrees and the smallest threshold."""
    by_seed: dict[int, list[SweepRow]] = defaultdict(list)
    for row in rows:
        by_seed[row.seed].append(row)
    failures = 0
    for seed_rows in by_seed.values():
        smallest = min(row.threshold for row in seed_rows)
        baseline = [row.recall for row in seed_rows if row.angle == 0.0 and row.threshold == smallest]
        if not baseline:
            continue
        for angle in sorted({row.angle for row in seed_rows}):
            best = max(row.recall for row in seed_rows if row.angle == angle)
            failures += best < baseline[0]
    return failures


def write_sweep_csv(rows: list[SweepRow], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SweepRow.CSV_HEADER)
        for row in rows:
            writer.writerow(
                [
                    row.seed,
                    repr(row.angle),
                    repr(row.threshold),
                    repr(row.precision),
                    repr(row.recall),
                    row.survivors,
                    "true" if row.accepted else "false",
                ]
            )


def read_sweep_csv(path: Path) -> list[SweepRow]:
    with path.open(newline="", encoding="utf-8") as handle:
        return [
            SweepRow(
                seed=int(record["seed"]),
                angle=float(record["angle"]),
                threshold=float(record["threshold"]),
                precision=float(record["precision"]),
                recall=float(record["recall"]),
                survivors=int(record["survivors"]),
                accepted=record["accepted"] == "true",
            )
            for record in csv.DictReader(handle)
        ]


def ratio_sweep(
    query: FeatureSet,
    gallery: FeatureSet,
    ratios: tuple[float, ...] = RATIOS,
    mmd: MmdParams | None = None,
) -> list[RatioSweepRow]:
    """Ratio-test match counts per ratio, plus MMD survivors of each match set."""
    mmd = mmd or MmdParams()
    rows = []
    for ratio in sorted(ratios):
        matches = match_knn_ratio(query, gallery, ratio)
        decision = mmd_filter(matches, query, gallery, mmd)
        rows.append(RatioSweepRow(ratio=ratio, matches=len(matches), survivors=decision.survivors))
    return rows


def write_ratio_csv(rows: list[RatioSweepRow], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(RatioSweepRow.CSV_HEADER)
        for row in rows:
            writer.writerow([repr(row.ratio), row.matches, row.survivors])
