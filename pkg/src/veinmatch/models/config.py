"""Pipeline configuration.

Config files are flat JSON objects keyed by ``section.field``; nested
sections are accepted too. Defaults encode the evaluation protocol: resize
0.6, 16-pixel tiles, ratio test 0.7, T_mu 25 and T_D 30.
"""

from typing import Any, Mapping

from pydantic import BaseModel, ConfigDict, Field

from veinmatch.models.enums import ErosionOrder, FilterKind, MatcherKind, RoiAnchor, ScoreAggregation
from veinmatch.models.evaluation import MAX_TEMPLATE_SIZE
from veinmatch.models.features import SiftParams
from veinmatch.models.filtering import MmdParams, RansacParams

_FROZEN = ConfigDict(frozen=True, extra="forbid")


class EnhancementConfig(BaseModel):
    tile_size: int = Field(default=16, ge=4)
    clip_fraction: float = Field(default=0.98, gt=0, le=1)
    enabled: bool = True

    model_config = _FROZEN


class RoiConfig(BaseModel):
    anchor: RoiAnchor = RoiAnchor.TOP
    erosion_radius: int = Field(default=8, ge=1)
    erosion_order: ErosionOrder = ErosionOrder.BEFORE_RESIZE
    resize_factor: float = Field(default=0.6, gt=0, le=4)
    defect_depth_fraction: float = Field(default=0.05, gt=0, lt=1)
    min_component_area: int = Field(default=64, ge=1)

    model_config = _FROZEN


class MatcherConfig(BaseModel):
    kind: MatcherKind = MatcherKind.ED
    ratio: float = Field(default=0.7, gt=0, lt=1)
    max_distance: float | None = Field(default=None, ge=0)
    root_sift: bool = False

    model_config = _FROZEN


class FilterConfig(BaseModel):
    kind: FilterKind = FilterKind.NONE
    mmd: MmdParams = Field(default_factory=MmdParams)
    ransac: RansacParams = Field(default_factory=RansacParams)

    model_config = _FROZEN


class ProtocolConfig(BaseModel):
    template_size: int = Field(default=1, ge=1, le=MAX_TEMPLATE_SIZE)
    dev_fraction: float = Field(default=0.2, gt=0, lt=1)
    seed: int = 0
    aggregation: ScoreAggregation = ScoreAggregation.MAX
    cross_hand: bool = False

    model_config = _FROZEN


class PipelineConfig(BaseModel):
    enhancement: EnhancementConfig = Field(default_factory=EnhancementConfig)
    roi: RoiConfig = Field(default_factory=RoiConfig)
    sift: SiftParams = Field(default_factory=SiftParams)
    matcher: MatcherConfig = Field(default_factory=MatcherConfig)
    filter: FilterConfig = Field(default_factory=FilterConfig)
    protocol: ProtocolConfig = Field(default_factory=ProtocolConfig)

    model_config = _FROZEN

    @classmethod
    def from_flat(cls, data: Mapping[str, Any]) -> "PipelineConfig":
        """Build a config from ``section.field`` keys (nested dicts also accepted)."""
        return cls.model_validate(expand_flat(data))

    def to_flat(self) -> dict[str, Any]:
        return flatten(self.model_dump(mode="json"))

    def with_overrides(self, overrides: Mapping[str, Any]) -> "PipelineConfig":
        """Return a copy with flat ``section.field`` overrides applied; None values are ignored."""
        merged = self.to_flat()
        merged.update({key: value for key, value in overrides.items() if value is not None})
        return PipelineConfig.from_flat(merged)


def expand_flat(data: Mapping[str, Any]) -> dict[str, Any]:
    nested: dict[str, Any] = {}
    for key, value in data.items():
        parts = key.split(".")
        cursor = nested
        for part in parts[:-1]:
            cursor = cursor.setdefault(part, {})
            if not isinstance(cursor, dict):
                raise ValueError(f"config key '{key}' conflicts with a scalar value")
        leaf = parts[-1]
        if isinstance(value, Mapping):
            existing = cursor.setdefault(leaf, {})
            existing.update(expand_flat(value))
        else:
            cursor[leaf] = value
    return nested


def flatten(data: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for key, value in data.items():
        full_key = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(flatten(value, prefix=f"{full_key}."))
        else:
            flat[full_key] = value
    return flat
