from typing import Any, ClassVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from veinmatch.models.base import ArrayModel, ensure_array
from veinmatch.models.filtering import SimilarityTransform


class SceneSpec(BaseModel):
    """Parameters of one synthetic correspondence scene.

    ``rotation`` is in radians about the frame center. When ``inlier_radius``
    is set, inlier gallery points are drawn from the disk of that radius around
    the center instead of the whole frame.
    """

    FRAME_SIZE: ClassVar[int] = 512

    n_inliers: int = Field(default=30, ge=0)
    n_outliers: int = Field(default=30, ge=0)
    rotation: float = 0.0
    scale: float = 1.0
    tx: float = 0.0
    ty: float = 0.0
    noise_sigma: float = 0.0
    inlier_radius: float | None = None
    seed: int = 0

    model_config = ConfigDict(frozen=True, extra="forbid")

    @property
    def center(self) -> tuple[float, float]:
        half = self.FRAME_SIZE / 2.0
        return half, half

    @property
    def n_pairs(self) -> int:
        return self.n_inliers + self.n_outliers


class SyntheticScene(ArrayModel):
    """Gallery and query point clouds with known inlier correspondences."""

    gallery_points: np.ndarray
    query_points: np.ndarray
    true_correspondence: list[tuple[int, int]]
    transform: SimilarityTransform
    noise_sigma: float = Field(ge=0)
    n_outliers: int = Field(ge=0)
    seed: int

    @field_validator("gallery_points", "query_points", mode="before")
    @classmethod
    def _freeze_points(cls, value: Any) -> np.ndarray:
        points = ensure_array(np.asarray(value, dtype=np.float64).reshape(-1, 2), ndim=2, name="points")
        return points

    @model_validator(mode="after")
    def _validate_indices(self) -> "SyntheticScene":
        n_gallery, n_query = len(self.gallery_points), len(self.query_points)
        for gallery_idx, query_idx in self.true_correspondence:
            if not (0 <= gallery_idx < n_gallery and 0 <= query_idx < n_query):
                raise ValueError("true correspondence index out of range")
        return self

    @property
    def n_inliers(self) -> int:
        return len(self.true_correspondence)

    def inlier_pairs(self) -> set[tuple[int, int]]:
        return set(self.true_correspondence)


class FilterMetrics(BaseModel):
    """Precision and recall of a filter's survivors against scene ground truth.

    ``precision_defaulted`` marks the zero-survivor case, where precision is
    reported as 1.0.
    """

    precision: float = Field(ge=0, le=1)
    recall: float = Field(ge=0, le=1)
    survivors: int = Field(ge=0)
    true_survivors: int = Field(ge=0)
    image_accepted: bool
    precision_defaulted: bool = False

    model_config = ConfigDict(frozen=True, extra="forbid")


class SweepRow(BaseModel):
    """One (seed, angle, threshold) cell of a synthetic MMD sweep; angle in degrees."""

    CSV_HEADER: ClassVar[tuple[str, ...]] = (
        "seed",
        "angle",
        "threshold",
        "precision",
        "recall",
        "survivors",
        "accepted",
    )

    seed: int
    angle: float
    threshold: float
    precision: float = Field(ge=0, le=1)
    recall: float = Field(ge=0, le=1)
    survivors: int = Field(ge=0)
    accepted: bool

    model_config = ConfigDict(frozen=True, extra="forbid")

    def sort_key(self) -> tuple[int, float, float]:
        return self.seed, self.angle, self.threshold


class RatioSweepRow(BaseModel):
    """Matches kept by the ratio test at one ratio, and how many survive MMD."""

    CSV_HEADER: ClassVar[tuple[str, ...]] = ("ratio", "matches", "survivors")

    ratio: float
    matches: int = Field(ge=0)
    survivors: int = Field(ge=0)

    model_config = ConfigDict(frozen=True, extra="forbid")


class HandPose(BaseModel):
    """Rigid jitter of a rendered hand: rotation (radians) about the canvas center, then a shift."""

    angle: float = 0.0
    dx: float = 0.0
    dy: float = 0.0

    model_config = ConfigDict(frozen=True, extra="forbid")


class PalmPattern(ArrayModel):
    """Per-identity vein polylines and dark oriented spots in canonical canvas coordinates.

    Rows of ``spots`` are (x, y, minor sigma, major sigma, angle, depth).
    """

    veins: list[np.ndarray]
    spots: np.ndarray

    @field_validator("veins", mode="before")
    @classmethod
    def _freeze_veins(cls, value: Any) -> list[np.ndarray]:
        return [ensure_array(np.asarray(vein, dtype=np.float64).reshape(-1, 2), ndim=2, name="vein") for vein in value]

    @field_validator("spots", mode="before")
    @classmethod
    def _freeze_spots(cls, value: Any) -> np.ndarray:
        spots = ensure_array(np.asarray(value, dtype=np.float64).reshape(-1, 6), ndim=2, name="spots")
        if np.any(spots[:, 2:4] <= 0):
            raise ValueError("spot sigmas must be positive")
        return spots
