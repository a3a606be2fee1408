import math
from typing import Any, ClassVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from veinmatch.models.base import ArrayModel, ensure_array

DESCRIPTOR_LENGTH = 128
UNIT_NORM_TOLERANCE = 1e-5


class SiftParams(BaseModel):
    """Scale-space and descriptor parameters (Lowe's published defaults)."""

    n_octaves: int | None = Field(default=None, ge=1)
    scales_per_octave: int = Field(default=3, ge=1)
    sigma0: float = Field(default=1.6, gt=0)
    assumed_blur: float = Field(default=0.5, ge=0)
    contrast_threshold: float = Field(default=0.03, gt=0)
    edge_ratio: float = Field(default=10.0, gt=1)
    double_input: bool = False
    max_interpolation_steps: int = Field(default=5, ge=1)
    border: int = Field(default=5, ge=1)
    mask_filtering: bool = True

    model_config = ConfigDict(frozen=True, extra="forbid")

    MIN_DIMENSION: ClassVar[int] = 16

    @model_validator(mode="after")
    def _validate_blur(self) -> "SiftParams":
        if self.assumed_blur >= self.sigma0:
            raise ValueError("assumed_blur must be smaller than sigma0")
        return self


class Keypoint(BaseModel):
    """A localized scale-space extremum in original-image coordinates."""

    x: float
    y: float
    scale: float = Field(gt=0)
    orientation: float = 0.0
    response: float = Field(default=0.0, ge=0)
    octave: int = 0

    model_config = ConfigDict(frozen=True, extra="forbid")

    @field_validator("x", "y", "scale", "response")
    @classmethod
    def _ensure_finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("keypoint fields must be finite")
        return value

    @field_validator("orientation")
    @classmethod
    def _validate_orientation(cls, value: float) -> float:
        if not (-math.pi <= value < math.pi):
            raise ValueError("orientation must lie within [-pi, pi)")
        return value


class FeatureSet(ArrayModel):
    """Keypoints with a parallel (n, 128) descriptor matrix.

    Each descriptor row has unit L2 norm, or is all zeros for a patch without
    gradient.
    """

    source_id: str
    keypoints: list[Keypoint] = Field(default_factory=list)
    descriptors: np.ndarray = Field(default_factory=lambda: np.zeros((0, DESCRIPTOR_LENGTH)))

    @field_validator("descriptors", mode="before")
    @classmethod
    def _freeze_descriptors(cls, value: Any) -> np.ndarray:
        descriptors = ensure_array(value, ndim=2, dtype=np.float64, name="descriptors")
        if descriptors.shape[1] != DESCRIPTOR_LENGTH:
            raise ValueError(f"descriptors must have {DESCRIPTOR_LENGTH} columns")
        if not np.all(np.isfinite(descriptors)):
            raise ValueError("descriptors must be finite")
        norms = np.linalg.norm(descriptors, axis=1)
        valid = (np.abs(norms - 1.0) <= UNIT_NORM_TOLERANCE) | (norms == 0.0)
        if not np.all(valid):
            raise ValueError("descriptors must be unit length or all-zero")
        return descriptors

    @model_validator(mode="after")
    def _validate_parallel(self) -> "FeatureSet":
        if len(self.keypoints) != self.descriptors.shape[0]:
            raise ValueError("keypoints and descriptors must have equal length")
        return self

    def __len__(self) -> int:
        return len(self.keypoints)

    def coordinates(self) -> np.ndarray:
        """Keypoint (x, y) positions as an (n, 2) array."""
        if not self.keypoints:
            return np.zeros((0, 2))
        return np.array([(kp.x, kp.y) for kp in self.keypoints], dtype=np.float64)

    def to_record(self) -> dict[str, Any]:
        return {
            "source_id": self.source_id,
            "keypoints": [kp.model_dump(mode="json") for kp in self.keypoints],
            "descriptors": self.descriptors.tolist(),
        }

    @classmethod
    def from_record(cls, data: dict[str, Any]) -> "FeatureSet":
        descriptors = data.get("descriptors") or np.zeros((0, DESCRIPTOR_LENGTH))
        return cls(
            source_id=data["source_id"],
            keypoints=[Keypoint.model_validate(item) for item in data.get("keypoints", [])],
            descriptors=descriptors,
        )
