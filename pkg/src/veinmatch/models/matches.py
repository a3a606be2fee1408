from typing import ClassVar

from pydantic import BaseModel, ConfigDict, Field, model_validator

from veinmatch.models.base import RecordModel


class MatchPair(BaseModel):
    """One correspondence between query (P) keypoint and gallery (G) keypoint."""

    query_idx: int = Field(ge=0)
    gallery_idx: int = Field(ge=0)
    distance: float = Field(ge=0)

    model_config = ConfigDict(frozen=True, extra="forbid")


class MatchSet(RecordModel):
    SCHEMA_VERSION: ClassVar[str] = "match_set.v1"

    schema_version: str = Field(default=SCHEMA_VERSION)
    query_id: str
    gallery_id: str
    pairs: list[MatchPair] = Field(default_factory=list)

    @model_validator(mode="after")
    def _validate_unique_queries(self) -> "MatchSet":
        query_indices = [pair.query_idx for pair in self.pairs]
        if len(query_indices) != len(set(query_indices)):
            raise ValueError("each query keypoint may appear in at most one pair")
        return self

    def __len__(self) -> int:
        return len(self.pairs)

    def with_pairs(self, pairs: list[MatchPair]) -> "MatchSet":
        return MatchSet(query_id=self.query_id, gallery_id=self.gallery_id, pairs=pairs)

    def validate_against(self, query_size: int, gallery_size: int) -> None:
        """Raise ValueError if any index falls outside the given set sizes."""
        for pair in self.pairs:
            if pair.query_idx >= query_size or pair.gallery_idx >= gallery_size:
                raise ValueError(
                    f"pair ({pair.query_idx}, {pair.gallery_idx}) outside sets of size ({query_size}, {gallery_size})"
                )
