import math
from typing import Any, ClassVar

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from veinmatch.models.base import RecordModel
from veinmatch.models.enums import Hand
from veinmatch.models.features import FeatureSet

MAX_TEMPLATE_SIZE = 5


class Identity(BaseModel):
    """Left and right hands of one subject are distinct identities."""

    subject_id: str
    hand: Hand

    model_config = ConfigDict(frozen=True, extra="forbid")

    @field_validator("hand", mode="before")
    @classmethod
    def _parse_hand(cls, value: Any) -> Hand:
        if isinstance(value, Hand):
            return value
        return Hand.parse(str(value))

    @classmethod
    def from_key(cls, key: str) -> "Identity":
        """Inverse of ``key``: ``001_left`` -> subject 001, left hand."""
        subject_id, sep, hand = key.strip().rpartition("_")
        if not sep or not subject_id:
            raise ValueError(f"expected <subject>_<hand>, got '{key}'")
        return cls(subject_id=subject_id, hand=hand)

    @property
    def key(self) -> str:
        return f"{self.subject_id}_{self.hand.value}"

    def sort_key(self) -> tuple[str, str]:
        return self.subject_id, self.hand.value


class ManifestEntry(BaseModel):
    image_path: str
    subject_id: str
    hand: Hand
    sample_index: int = Field(ge=0)

    model_config = ConfigDict(frozen=True, extra="forbid")

    @field_validator("hand", mode="before")
    @classmethod
    def _parse_hand(cls, value: Any) -> Hand:
        if isinstance(value, Hand):
            return value
        return Hand.parse(str(value))

    @property
    def identity(self) -> Identity:
        return Identity(subject_id=self.subject_id, hand=self.hand)

    @property
    def sample_id(self) -> str:
        return f"{self.subject_id}_{self.hand.value}_{self.sample_index:02d}"


class DatasetManifest(RecordModel):
    SCHEMA_VERSION: ClassVar[str] = "dataset_manifest.v1"

    schema_version: str = Field(default=SCHEMA_VERSION)
    entries: list[ManifestEntry] = Field(default_factory=list)
    parsing_rule: str = "csv"

    @model_validator(mode="after")
    def _validate_unique(self) -> "DatasetManifest":
        keys = [(e.subject_id, e.hand, e.sample_index) for e in self.entries]
        if len(keys) != len(set(keys)):
            raise ValueError("(subject_id, hand, sample_index) must be unique")
        return self

    def __len__(self) -> int:
        return len(self.entries)

    def identities(self) -> list[Identity]:
        unique = {entry.identity for entry in self.entries}
        return sorted(unique, key=Identity.sort_key)

    def entries_for(self, identity: Identity) -> list[ManifestEntry]:
        matching = [e for e in self.entries if e.identity == identity]
        return sorted(matching, key=lambda e: e.sample_index)

    def subset(self, identities: list[Identity]) -> "DatasetManifest":
        wanted = set(identities)
        return DatasetManifest(
            entries=[e for e in self.entries if e.identity in wanted],
            parsing_rule=self.parsing_rule,
        )


class Sample(BaseModel):
    """Features of one image with its identity and acquisition index."""

    identity: Identity
    sample_index: int = Field(ge=0)
    features: FeatureSet

    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    @property
    def sample_id(self) -> str:
        return f"{self.identity.key}_{self.sample_index:02d}"


class Template(BaseModel):
    identity: Identity
    members: list[FeatureSet] = Field(min_length=1, max_length=MAX_TEMPLATE_SIZE)

    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    @property
    def size(self) -> int:
        return len(self.members)


class Enrollment(BaseModel):
    template: Template
    probes: list[Sample]

    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _validate_identity(self) -> "Enrollment":
        if any(probe.identity != self.template.identity for probe in self.probes):
            raise ValueError("probes must share the template identity")
        return self


class ScoreRecord(BaseModel):
    probe_id: str
    probe_identity: str
    gallery_identity: str
    score: float = Field(ge=0)
    genuine: bool

    model_config = ConfigDict(frozen=True, extra="forbid")

    @field_validator("score")
    @classmethod
    def _ensure_finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("score must be finite")
        return value

    def sort_key(self) -> tuple[str, str]:
        return self.probe_id, self.gallery_identity


class CurvePoint(BaseModel):
    threshold: float
    rate: float = Field(ge=0, le=1)

    model_config = ConfigDict(frozen=True, extra="forbid")


class EerResult(BaseModel):
    eer: float = Field(ge=0, le=1)
    threshold_at_eer: float
    far_curve: list[CurvePoint]
    frr_curve: list[CurvePoint]
    n_genuine: int = Field(ge=1)
    n_impostor: int = Field(ge=1)

    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def _validate_monotone(self) -> "EerResult":
        far = [point.rate for point in self.far_curve]
        frr = [point.rate for point in self.frr_curve]
        if any(later > earlier for earlier, later in zip(far, far[1:])):
            raise ValueError("FAR must be non-increasing in the threshold")
        if any(later < earlier for earlier, later in zip(frr, frr[1:])):
            raise ValueError("FRR must be non-decreasing in the threshold")
        return self
