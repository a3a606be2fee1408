"""Factory functions for creating and wiring the matching services.

Production factories persist templates to a database file; test factories use
in-memory SQLite for fast, isolated tests.
"""

import json
from pathlib import Path
from typing import Any, Mapping

import structlog
from pydantic import ValidationError

from veinmatch.errors import ConfigError, EnrollmentError
from veinmatch.models.config import PipelineConfig
from veinmatch.services.enrollment import EnrollmentService
from veinmatch.services.evaluation import EvaluationService
from veinmatch.services.extractor import FeatureExtractor
from veinmatch.services.template_store import TemplateStore, create_async_engine_from_path


def load_config(path: Path | None = None, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    """Resolve a PipelineConfig: flag overrides over the JSON file over defaults.

    Raises:
        ConfigError: If the file is unreadable or any value fails validation.
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a JSON object")
    try:
        config = PipelineConfig.from_flat(data)
        return config.with_overrides(overrides or {})
    except (ValidationError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def create_feature_extractor(config: PipelineConfig) -> FeatureExtractor:
    return FeatureExtractor(config, logger=structlog.get_logger(__name__))


def create_evaluation_service(config: PipelineConfig, max_workers: int | None = None) -> EvaluationService:
    logger = structlog.get_logger(__name__)
    return EvaluationService(
        config=config,
        extractor=FeatureExtractor(config, logger=logger),
        max_workers=max_workers,
        logger=logger,
    )


def create_enrollment_service(
    db_path: Path,
    config: PipelineConfig,
    max_workers: int | None = None,
) -> EnrollmentService:
    """Create an EnrollmentService writing templates to the SQLite file ``db_path``."""
    logger = structlog.get_logger(__name__)
    db_path.parent.mkdir(parents=True, exist_ok=True)
    store = TemplateStore(engine=create_async_engine_from_path(str(db_path)), logger=logger)
    return EnrollmentService(
        extractor=FeatureExtractor(config, logger=logger),
        store=store,
        max_workers=max_workers,
        logger=logger,
    )


def create_template_store(db_path: Path) -> TemplateStore:
    """Open an existing template database for reading.

    Raises:
        EnrollmentError: ``db_path`` does not exist; nothing was enrolled there.
    """
    if not db_path.is_file():
        raise EnrollmentError(f"template database not found: {db_path}")
    return TemplateStore(engine=create_async_engine_from_path(str(db_path)), logger=structlog.get_logger(__name__))


def create_test_enrollment_service(config: PipelineConfig | None = None) -> EnrollmentService:
    """Create an EnrollmentService backed by in-memory SQLite."""
    logger = structlog.get_logger(__name__)
    store = TemplateStore(engine=create_async_engine_from_path(":memory:"), logger=logger)
    return EnrollmentService(
        extractor=FeatureExtractor(config or PipelineConfig(), logger=logger),
        store=store,
        max_workers=2,
        logger=logger,
    )
