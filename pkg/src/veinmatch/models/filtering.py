from typing import ClassVar

from pydantic import BaseModel, ConfigDict, Field, model_validator

from veinmatch.models.base import RecordModel
from veinmatch.models.enums import FilterKind
from veinmatch.models.matches import MatchPair, MatchSet


class MmdParams(BaseModel):
    """Thresholds of the mean-and-median distance filter, in pixels."""

    t_mu: float = Field(default=25.0, gt=0)
    t_d: float = Field(default=30.0, gt=0)
    inclusive_bounds: bool = False
    signed_distances: bool = False

    model_config = ConfigDict(frozen=True, extra="forbid")


class MmdStats(BaseModel):
    """Per-axis coordinate differences of matched pairs and their summaries."""

    d_x: list[float]
    d_y: list[float]
    mu_x: float
    mu_y: float
    med_x: float
    med_y: float
    n_low: int = Field(ge=0)
    n_high: int = Field(ge=0)
    signed: bool = False

    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def _validate_stats(self) -> "MmdStats":
        if len(self.d_x) != len(self.d_y):
            raise ValueError("d_x and d_y must have equal length")
        if self.n_low + self.n_high > len(self.d_x):
            raise ValueError("n_low + n_high cannot exceed the number of pairs")
        if not self.signed:
            if any(d < 0 for d in self.d_x) or any(d < 0 for d in self.d_y):
                raise ValueError("distances must be non-negative")
            if min(self.mu_x, self.mu_y, self.med_x, self.med_y) < 0:
                raise ValueError("means and medians must be non-negative")
        return self


class MmdDecision(RecordModel):
    """Image-level verdict plus surviving pairs.

    ``stats`` is None only for an empty input, which is always rejected.
    """

    SCHEMA_VERSION: ClassVar[str] = "mmd_decision.v1"

    schema_version: str = Field(default=SCHEMA_VERSION)
    image_accepted: bool
    accepted: list[MatchPair] = Field(default_factory=list)
    stats: MmdStats | None = None
    n_pairs: int = Field(ge=0)

    @model_validator(mode="after")
    def _validate_decision(self) -> "MmdDecision":
        if not self.image_accepted and self.accepted:
            raise ValueError("a rejected image cannot keep accepted pairs")
        if len(self.accepted) > self.n_pairs:
            raise ValueError("more survivors than input pairs")
        return self

    @property
    def survivors(self) -> int:
        return len(self.accepted)

    def survivor_indices(self) -> list[int]:
        return sorted(pair.query_idx for pair in self.accepted)


class RansacParams(BaseModel):
    iterations: int = Field(default=500, ge=1)
    inlier_tolerance: float = Field(default=3.0, gt=0)
    seed: int = 0

    model_config = ConfigDict(frozen=True, extra="forbid")


class SimilarityTransform(BaseModel):
    """x' = scale * R(rotation) x + (tx, ty)."""

    rotation: float
    scale: float = Field(gt=0)
    tx: float
    ty: float

    model_config = ConfigDict(frozen=True, extra="forbid")


class RansacResult(RecordModel):
    SCHEMA_VERSION: ClassVar[str] = "ransac_result.v1"

    schema_version: str = Field(default=SCHEMA_VERSION)
    matches: MatchSet
    degenerate: bool = False
    model: SimilarityTransform | None = None


class FilterOutcome(RecordModel):
    """Survivors of whichever post-filter ran, with its detailed verdict."""

    SCHEMA_VERSION: ClassVar[str] = "filter_outcome.v1"

    schema_version: str = Field(default=SCHEMA_VERSION)
    kind: FilterKind
    survivors: MatchSet
    image_accepted: bool = True
    mmd: MmdDecision | None = None
    ransac: RansacResult | None = None

    @property
    def score(self) -> int:
        return len(self.survivors) if self.image_accepted else 0
