"""Enrollment service: extract a manifest's images and store one template per identity."""

import asyncio
import os
from pathlib import Path

import structlog
from pydantic import BaseModel, Field

from veinmatch.errors import EnrollmentError
from veinmatch.models.evaluation import MAX_TEMPLATE_SIZE, DatasetManifest, Identity, Template
from veinmatch.services.extractor import FeatureExtractor
from veinmatch.services.template_store import TemplateStore


class EnrollmentSummary(BaseModel):
    templates: int = Field(ge=0)
    samples: int = Field(ge=0)

    model_config = {"frozen": True}


class EnrollmentService:
    """Builds templates from the first ``template_size`` samples of each identity and stores them."""

    def __init__(
        self,
        extractor: FeatureExtractor,
        store: TemplateStore,
        max_workers: int | None = None,
        logger: structlog.stdlib.BoundLogger | None = None,
    ) -> None:
        self._extractor = extractor
        self._store = store
        self._max_workers = max_workers or os.cpu_count() or 1
        self._logger = logger or structlog.get_logger(__name__)

    async def close(self) -> None:
        await self._store.close()

    async def __aenter__(self) -> "EnrollmentService":
        return self

    async def __aexit__(
        self,
        exc_type: type[BaseException] | None,
        exc_val: BaseException | None,
        exc_tb: object,
    ) -> None:
        await self.close()

    async def enroll_manifest(self, manifest: DatasetManifest, template_size: int) -> EnrollmentSummary:
        """Extract and store a template for every identity in ``manifest``.

        Args:
            manifest: Labelled images; each identity needs at least ``template_size`` samples.
            template_size: Number of lowest-index samples that form each template.

        Returns:
            Counts of stored templates and extracted samples.
        """
        if not (1 <= template_size <= MAX_TEMPLATE_SIZE):
            raise EnrollmentError(f"template size must lie in [1, {MAX_TEMPLATE_SIZE}], got {template_size}")
        identities = manifest.identities()
        short = [i.key for i in identities if len(manifest.entries_for(i)) < template_size]
        if short:
            raise EnrollmentError(f"identities with fewer than {template_size} samples: {', '.join(short)}")

        await self._store.initialize_schema()
        self._logger.info("enrollment_started", identities=len(identities), template_size=template_size)
        semaphore = asyncio.Semaphore(self._max_workers)

        async def _enroll(identity: Identity) -> Template:
            entries = manifest.entries_for(identity)[:template_size]
            members = []
            for entry in entries:
                async with semaphore:
                    result = await self._extractor.extract_path_async(Path(entry.image_path), entry.sample_id)
                members.append(result.features)
            return Template(identity=identity, members=members)

        templates = await asyncio.gather(*(_enroll(identity) for identity in identities))
        for template in templates:
            await self._store.save_template(template)

        self._logger.info("enrollment_completed", templates=len(templates))
        return EnrollmentSummary(templates=len(templates), samples=len(templates) * template_size)
