from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from veinmatch.models.base import ArrayModel, ensure_array, ensure_point


class Contour(ArrayModel):
    """Closed polygon as an (n, 2) array of (x, y) pixel coordinates.

    Orientation is counter-clockwise in raw (x, y) coordinates, i.e. the
    shoelace area is positive. Traced borders are 8-connected; hulls are not.
    """

    points: np.ndarray

    @field_validator("points", mode="before")
    @classmethod
    def _freeze_points(cls, value: Any) -> np.ndarray:
        points = ensure_array(value, ndim=2, dtype=np.float64, name="points")
        if points.shape[1] != 2:
            raise ValueError("points must have shape (n, 2)")
        if points.shape[0] < 3:
            raise ValueError("a contour needs at least 3 points")
        if not np.all(np.isfinite(points)):
            raise ValueError("points must be finite")
        return points

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def signed_area(self) -> float:
        x, y = self.points[:, 0], self.points[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def perimeter(self) -> float:
        steps = np.diff(np.vstack([self.points, self.points[:1]]), axis=0)
        return float(np.hypot(steps[:, 0], steps[:, 1]).sum())

    def is_8_connected(self) -> bool:
        steps = np.abs(np.diff(np.vstack([self.points, self.points[:1]]), axis=0))
        return bool(np.all(steps.max(axis=1) <= 1))


class ValleyCandidate(BaseModel):
    """Deepest contour point under one hull edge."""

    x: float
    y: float
    depth: float = Field(ge=0)
    span: float = Field(ge=0)

    model_config = ConfigDict(frozen=True, extra="forbid")

    @property
    def point(self) -> tuple[float, float]:
        return self.x, self.y


class ValleyAnnotation(BaseModel):
    """Sidecar override for automatic valley detection."""

    left: tuple[float, float]
    right: tuple[float, float]

    model_config = ConfigDict(frozen=True, extra="forbid")

    @field_validator("left", "right", mode="before")
    @classmethod
    def _validate_point(cls, value: Any) -> tuple[float, float]:
        return ensure_point(value, "valley")


class RoiGeometry(BaseModel):
    """Alignment and crop parameters of one extracted ROI.

    ``unit_d`` is the post-rotation valley distance; ``origin`` is the crop's
    top-left corner in the rotated source frame.
    """

    left_valley: tuple[float, float]
    right_valley: tuple[float, float]
    aligned_left: tuple[float, float]
    aligned_right: tuple[float, float]
    rotation: float
    unit_d: float = Field(gt=0)
    origin: tuple[int, int]
    side: int = Field(gt=0)

    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def _validate_alignment(self) -> "RoiGeometry":
        if abs(self.aligned_left[1] - self.aligned_right[1]) > 0.5:
            raise ValueError("aligned valley points must share a y-coordinate within 0.5 px")
        return self
