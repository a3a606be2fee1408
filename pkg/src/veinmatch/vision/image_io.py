"""8-bit image file I/O. The only place intensities are quantized."""

from pathlib import Path

import cv2
import numpy as np

from veinmatch.errors import ImageReadError
from veinmatch.models.image import BinaryMask, GrayImage

SUPPORTED_SUFFIXES = frozenset({".png", ".pgm", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"})


def read_image(path: Path) -> GrayImage:
    """Load an image as grayscale in [0, 1]; color channels are averaged, alpha dropped."""
    if not path.is_file():
        raise ImageReadError(f"image not found: {path}")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageReadError(f"cannot decode image: {path}")
    scale = 65535.0 if raw.dtype == np.uint16 else 255.0
    values = raw.astype(np.float64) / scale
    if values.ndim == 3:
        values = values[:, :, :3].mean(axis=2)
    return GrayImage.from_array(values)


def to_uint8(img: GrayImage) -> np.ndarray:
    return np.rint(img.pixels * 255.0).astype(np.uint8)


def write_image(path: Path, img: GrayImage) -> None:
    _write(path, to_uint8(img))


def write_mask(path: Path, mask: BinaryMask) -> None:
    _write(path, mask.bits.astype(np.uint8) * 255)


def _write(path: Path, raster: np.ndarray) -> None:
    if path.suffix.lower() not in SUPPORTED_SUFFIXES:
        raise ValueError(f"unsupported image format: {path.suffix}")
    path.parent.mkdir(parents=True, exist_ok=True)
    params = [cv2.IMWRITE_PXM_BINARY, 1] if path.suffix.lower() == ".pgm" else []
    if not cv2.imwrite(str(path), raster, params):
        raise OSError(f"failed to write image: {path}")
