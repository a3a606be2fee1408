"""Evaluation service running the full closed-set protocol over a manifest.

Split by identity, extract features for the evaluation partition, enroll
templates, score every probe against every comparable template and report
EER per (filter, template size). Matching runs once per probe-member pair;
each requested filter and template size reuses those matches, so rows of one
report differ only in the filter or the template size.
"""

import asyncio
import os
from pathlib import Path

import structlog
from pydantic import BaseModel, ConfigDict

from veinmatch import __version__
from veinmatch.errors import VeinMatchError
from veinmatch.models.config import FilterConfig, PipelineConfig
from veinmatch.models.enums import FilterKind, Hand
from veinmatch.models.evaluation import DatasetManifest, Enrollment, ManifestEntry, Sample, ScoreRecord
from veinmatch.models.report import EvaluationReport, EvaluationRow
from veinmatch.services.extractor import FeatureExtractor
from veinmatch.services.protocol import build_protocol_split, enroll_all
from veinmatch.services.scoring import (
    MatchPipeline,
    comparison_plan,
    compute_eer,
    eer_by_hand,
    score_comparison_members,
)


class EvaluationOutcome(BaseModel):
    """The report plus the score records behind each of its rows."""

    report: EvaluationReport
    records: dict[tuple[FilterKind, int], list[ScoreRecord]]

    model_config = ConfigDict(frozen=True, extra="forbid")


class EvaluationService:
    """Orchestrates extraction, enrollment, scoring and EER for one manifest.

    Extraction and comparisons fan out over worker threads bounded by
    ``max_workers``; every result is order-normalized before it is reported.
    """

    def __init__(
        self,
        config: PipelineConfig | None = None,
        extractor: FeatureExtractor | None = None,
        max_workers: int | None = None,
        logger: structlog.stdlib.BoundLogger | None = None,
    ) -> None:
        self._config = config or PipelineConfig()
        self._logger = logger or structlog.get_logger(__name__)
        self._extractor = extractor or FeatureExtractor(self._config, logger=self._logger)
        self._max_workers = max_workers or os.cpu_count() or 1

    async def evaluate(
        self,
        manifest: DatasetManifest,
        template_sizes: list[int] | None = None,
        filters: list[FilterKind] | None = None,
    ) -> EvaluationOutcome:
        """Run the closed-set protocol and report EER per (filter, template size).

        Args:
            manifest: Every labelled image; the development partition is split off by identity.
            template_sizes: Template sizes to report; defaults to ``protocol.template_size``.
                Probes start after the largest size, so every row scores the same probes.
            filters: Post-filters to report; defaults to the configured filter.

        Returns:
            The report plus the sorted score records behind each row.

        Raises:
            ProtocolError: The manifest has too few identities to split.
            EnrollmentError: An evaluation identity has too few extracted samples.
            EvaluationError: A row lacks genuine or impostor scores.
        """
        protocol = self._config.protocol
        sizes = sorted(set(template_sizes or [protocol.template_size]))
        kinds = list(dict.fromkeys(filters or [self._config.filter.kind]))
        self._semaphore = asyncio.Semaphore(self._max_workers)
        self._logger.info(
            "evaluation_started",
            entries=len(manifest),
            template_sizes=sizes,
            filters=[kind.value for kind in kinds],
        )

        dev, evaluation = build_protocol_split(manifest, protocol.dev_fraction, protocol.seed)
        samples, failures = await self._extract_samples(evaluation)
        enrollments = enroll_all(samples, max(sizes), probe_start=max(sizes))
        member_scores = await self._score_members(enrollments, kinds)

        rows = []
        records: dict[tuple[FilterKind, int], list[ScoreRecord]] = {}
        for kind in kinds:
            pipeline = self._pipeline(kind)
            for size in sizes:
                row_records = sorted(
                    (
                        record.model_copy(update={"score": pipeline.aggregate(scores[kind][:size])})
                        for record, scores in member_scores
                    ),
                    key=ScoreRecord.sort_key,
                )
                records[(kind, size)] = row_records
                rows.append(self._row(kind, size, row_records))
                self._logger.info(
                    "evaluation_row_completed",
                    filter=kind.value,
                    template_size=size,
                    records=len(row_records),
                    eer=rows[-1].eer.eer,
                )

        report = EvaluationReport(
            toolkit_version=__version__,
            config=self._config.to_flat(),
            score_rule=f"filtered_match_count/{protocol.aggregation.value}",
            manifest_entries=len(manifest),
            dev_identities=[identity.key for identity in dev.identities()],
            eval_identities=[identity.key for identity in evaluation.identities()],
            probes=sum(len(enrollment.probes) for enrollment in enrollments),
            extraction_failures=failures,
            rows=rows,
        )
        self._logger.info("evaluation_completed", rows=len(rows), extraction_failures=len(failures))
        return EvaluationOutcome(report=report, records=records)

    def _pipeline(self, kind: FilterKind) -> MatchPipeline:
        filter_config = FilterConfig(kind=kind, mmd=self._config.filter.mmd, ransac=self._config.filter.ransac)
        return MatchPipeline(self._config.matcher, filter_config, self._config.protocol.aggregation)

    def _row(self, kind: FilterKind, size: int, records: list[ScoreRecord]) -> EvaluationRow:
        by_hand = eer_by_hand(records)
        return EvaluationRow(
            filter=kind,
            template_size=size,
            n_records=len(records),
            eer=compute_eer(records),
            eer_left=by_hand.get(Hand.LEFT),
            eer_right=by_hand.get(Hand.RIGHT),
        )

    async def _extract_samples(self, manifest: DatasetManifest) -> tuple[list[Sample], list[str]]:
        results = await asyncio.gather(*(self._extract_entry(entry) for entry in manifest.entries))
        samples = sorted((s for s in results if isinstance(s, Sample)), key=lambda s: s.sample_id)
        failures = sorted(s for s in results if isinstance(s, str))
        return samples, failures

    async def _extract_entry(self, entry: ManifestEntry) -> Sample | str:
        async with self._semaphore:
            try:
                result = await self._extractor.extract_path_async(Path(entry.image_path), entry.sample_id)
            except VeinMatchError as exc:
                self._logger.warning("extraction_failed", sample_id=entry.sample_id, error=str(exc))
                return entry.sample_id
        return Sample(identity=entry.identity, sample_index=entry.sample_index, features=result.features)

    async def _score_members(
        self,
        enrollments: list[Enrollment],
        kinds: list[FilterKind],
    ) -> list[tuple[ScoreRecord, dict[FilterKind, list[int]]]]:
        plan = comparison_plan(enrollments, self._config.protocol.cross_hand)
        pipelines = [self._pipeline(kind) for kind in kinds]

        async def _bounded(step: tuple[int, int, int]) -> tuple[ScoreRecord, dict[FilterKind, list[int]]]:
            async with self._semaphore:
                record, counts = await asyncio.to_thread(score_comparison_members, enrollments, step, pipelines)
            return record, dict(zip(kinds, counts))

        self._logger.debug("comparisons_planned", comparisons=len(plan), enrollments=len(enrollments))
        return list(await asyncio.gather(*(_bounded(step) for step in plan)))
