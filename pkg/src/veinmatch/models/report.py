from typing import Any, ClassVar

from pydantic import BaseModel, ConfigDict, Field

from veinmatch.models.base import RecordModel
from veinmatch.models.enums import FilterKind
from veinmatch.models.evaluation import EerResult


class EvaluationRow(BaseModel):
    """EER of one (filter, template size) combination over the evaluation partition."""

    filter: FilterKind
    template_size: int = Field(ge=1)
    n_records: int = Field(ge=0)
    eer: EerResult
    eer_left: EerResult | None = None
    eer_right: EerResult | None = None

    model_config = ConfigDict(frozen=True, extra="forbid")


class EvaluationReport(RecordModel):
    """Everything needed to reproduce an evaluation run from the report alone.

    ``config`` is the fully resolved flat configuration; ``score_rule`` names
    the comparison score and member aggregation in use.
    """

    SCHEMA_VERSION: ClassVar[str] = "evaluation_report.v1"

    schema_version: str = Field(default=SCHEMA_VERSION)
    toolkit_version: str
    config: dict[str, Any]
    score_rule: str
    manifest_entries: int = Field(ge=0)
    dev_identities: list[str]
    eval_identities: list[str]
    probes: int = Field(ge=0)
    extraction_failures: list[str] = Field(default_factory=list)
    rows: list[EvaluationRow]
