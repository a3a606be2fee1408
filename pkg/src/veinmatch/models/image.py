"""Raster value types shared by every pixel operation.

Intensities are real-valued in [0, 1]; quantization to 8 bits happens only in
vision.image_io.
"""

from typing import Any

import numpy as np
from pydantic import field_validator, model_validator

from veinmatch.models.base import ArrayModel, ensure_array

_RANGE_TOLERANCE = 1e-9


class GrayImage(ArrayModel):
    """Row-major grayscale raster, shape (height, width)."""

    pixels: np.ndarray

    @field_validator("pixels", mode="before")
    @classmethod
    def _freeze_pixels(cls, value: Any) -> np.ndarray:
        pixels = ensure_array(value, ndim=2, dtype=np.float64, name="pixels")
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise ValueError("image dimensions must be positive")
        if not np.all(np.isfinite(pixels)):
            raise ValueError("pixels must be finite")
        if pixels.min() < -_RANGE_TOLERANCE or pixels.max() > 1.0 + _RANGE_TOLERANCE:
            raise ValueError("pixel intensities must lie within [0, 1]")
        return pixels

    @classmethod
    def from_array(cls, values: np.ndarray) -> "GrayImage":
        """Build an image from arbitrary values, clipping them into [0, 1]."""
        return cls(pixels=np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0))

    @classmethod
    def constant(cls, width: int, height: int, value: float) -> "GrayImage":
        return cls(pixels=np.full((height, width), value, dtype=np.float64))

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width


class BinaryMask(ArrayModel):
    """Row-major boolean raster, shape (height, width)."""

    bits: np.ndarray

    @field_validator("bits", mode="before")
    @classmethod
    def _freeze_bits(cls, value: Any) -> np.ndarray:
        bits = ensure_array(value, ndim=2, dtype=bool, name="bits")
        if bits.shape[0] < 1 or bits.shape[1] < 1:
            raise ValueError("mask dimensions must be positive")
        return bits

    @classmethod
    def full(cls, width: int, height: int, value: bool = True) -> "BinaryMask":
        return cls(bits=np.full((height, width), value, dtype=bool))

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def count(self) -> int:
        return int(self.bits.sum())

    def contains(self, x: float, y: float) -> bool:
        col, row = int(round(x)), int(round(y))
        if not (0 <= row < self.height and 0 <= col < self.width):
            return False
        return bool(self.bits[row, col])


class GradientField(ArrayModel):
    """Per-pixel gradient of a GrayImage.

    ``dx`` and ``dy`` are the raw finite differences; ``orientation`` is in
    [-pi, pi) and 0 wherever ``magnitude`` is 0.
    """

    dx: np.ndarray
    dy: np.ndarray
    magnitude: np.ndarray
    orientation: np.ndarray

    @field_validator("dx", "dy", "magnitude", "orientation", mode="before")
    @classmethod
    def _freeze(cls, value: Any) -> np.ndarray:
        return ensure_array(value, ndim=2, dtype=np.float64)

    @model_validator(mode="after")
    def _validate_field(self) -> "GradientField":
        shapes = {self.dx.shape, self.dy.shape, self.magnitude.shape, self.orientation.shape}
        if len(shapes) != 1:
            raise ValueError("gradient components must share one shape")
        if np.any(self.magnitude < 0):
            raise ValueError("magnitude must be non-negative")
        if np.any(self.orientation < -np.pi) or np.any(self.orientation >= np.pi):
            raise ValueError("orientation must lie within [-pi, pi)")
        return self
