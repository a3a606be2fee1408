"""Pixel-level primitives over GrayImage and BinaryMask.

Every function is pure. Blur and gradients clamp at the borders, rotation fills
with zero, and nothing here ever returns intensities outside [0, 1].
"""

import math

import numpy as np
from scipy import ndimage

from veinmatch.errors import DegenerateHistogramError, ParameterError
from veinmatch.models.image import BinaryMask, GradientField, GrayImage

MAX_RESIZE_FACTOR = 4.0
HISTOGRAM_LEVELS = 256
MIN_TILE_SIZE = 4
_FLAT_RANGE = 1e-12


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian sampled on [-ceil(3 sigma), ceil(3 sigma)]."""
    if not math.isfinite(sigma) or sigma <= 0:
        raise ParameterError(f"sigma must be positive and finite, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def blur_array(values: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian on a raw float array with edge replication."""
    kernel = gaussian_kernel(sigma)
    rows = ndimage.correlate1d(values, kernel, axis=0, mode="nearest")
    return ndimage.correlate1d(rows, kernel, axis=1, mode="nearest")


def gaussian_blur(img: GrayImage, sigma: float) -> GrayImage:
    return GrayImage.from_array(blur_array(img.pixels, sigma))


def resized_shape(height: int, width: int, factor: float) -> tuple[int, int]:
    return int(math.floor(factor * height + 0.5)), int(math.floor(factor * width + 0.5))


def resize_bilinear(img: GrayImage, factor: float) -> GrayImage:
    """Resample by ``factor`` with pixel-center aligned bilinear interpolation."""
    if not math.isfinite(factor) or not (0.0 < factor <= MAX_RESIZE_FACTOR):
        raise ParameterError(f"resize factor must lie in (0, {MAX_RESIZE_FACTOR}], got {factor}")
    out_h, out_w = resized_shape(img.height, img.width, factor)
    if out_h < 1 or out_w < 1:
        raise ParameterError(f"factor {factor} shrinks {img.width}x{img.height} to nothing")
    if (out_h, out_w) == img.shape:
        return img
    src_rows = (np.arange(out_h) + 0.5) * (img.height / out_h) - 0.5
    src_cols = (np.arange(out_w) + 0.5) * (img.width / out_w) - 0.5
    grid_rows, grid_cols = np.meshgrid(src_rows, src_cols, indexing="ij")
    sampled = ndimage.map_coordinates(img.pixels, [grid_rows, grid_cols], order=1, mode="nearest")
    return GrayImage.from_array(sampled)


def resize_mask(mask: BinaryMask, factor: float) -> BinaryMask:
    """Resize a mask through the bilinear path, keeping pixels at or above one half."""
    resized = resize_bilinear(GrayImage(pixels=mask.bits.astype(np.float64)), factor)
    return BinaryMask(bits=resized.pixels >= 0.5)


def gradients(img: GrayImage) -> GradientField:
    if img.width < 2 or img.height < 2:
        raise ParameterError(f"gradients need at least 2x2 pixels, got {img.width}x{img.height}")
    dy, dx = np.gradient(img.pixels)
    magnitude = np.hypot(dx, dy)
    orientation = np.arctan2(dy, dx)
    orientation[orientation >= np.pi] = -np.pi
    orientation[magnitude == 0] = 0.0
    return GradientField(dx=dx, dy=dy, magnitude=magnitude, orientation=orientation)


def quantize(img: GrayImage) -> np.ndarray:
    """8-bit levels of an image, the same rounding the file writers use."""
    return np.rint(img.pixels * (HISTOGRAM_LEVELS - 1)).astype(np.int64)


def otsu_level(img: GrayImage) -> int:
    """Quantized threshold maximizing between-class variance; class 0 is ``level <= t``."""
    levels = quantize(img)
    histogram = np.bincount(levels.ravel(), minlength=HISTOGRAM_LEVELS).astype(np.float64)
    if np.count_nonzero(histogram) < 2:
        raise DegenerateHistogramError("image has fewer than two distinct intensity levels")
    probabilities = histogram / histogram.sum()
    weight0 = np.cumsum(probabilities)
    cumulative_mean = np.cumsum(probabilities * np.arange(HISTOGRAM_LEVELS))
    total_mean = cumulative_mean[-1]
    denominator = weight0 * (1.0 - weight0)
    between = np.zeros(HISTOGRAM_LEVELS)
    valid = denominator > 0
    between[valid] = (total_mean * weight0[valid] - cumulative_mean[valid]) ** 2 / denominator[valid]
    return int(np.argmax(between))


def otsu_threshold(img: GrayImage) -> BinaryMask:
    level = otsu_level(img)
    return BinaryMask(bits=quantize(img) > level)


def erode(mask: BinaryMask, radius: int) -> BinaryMask:
    """Chebyshev-ball erosion; pixels outside the raster count as false."""
    if radius < 1 or radius >= min(mask.width, mask.height):
        raise ParameterError(f"erosion radius must lie in [1, {min(mask.width, mask.height)}), got {radius}")
    structure = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    eroded = ndimage.binary_erosion(mask.bits, structure=structure, border_value=0)
    return BinaryMask(bits=eroded)


def rotation_source_coordinates(
    shape: tuple[int, int], angle: float, center: tuple[float, float]
) -> tuple[np.ndarray, np.ndarray]:
    """Source (row, col) grids sampled by ``rotate_about`` for each output pixel."""
    height, width = shape
    cx, cy = center
    rows, cols = np.meshgrid(np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64), indexing="ij")
    dx, dy = cols - cx, rows - cy
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    src_x = cos_a * dx + sin_a * dy + cx
    src_y = -sin_a * dx + cos_a * dy + cy
    return src_y, src_x


def rotate_point(point: tuple[float, float], angle: float, center: tuple[float, float]) -> tuple[float, float]:
    """Forward map used by ``rotate_about``: p -> R(angle)(p - c) + c."""
    cos_a, sin_a = math.cos(angle), math.sin(angle)
    dx, dy = point[0] - center[0], point[1] - center[1]
    return cos_a * dx - sin_a * dy + center[0], sin_a * dx + cos_a * dy + center[1]


def rotate_about(img: GrayImage, angle: float, center: tuple[float, float]) -> GrayImage:
    """Rotate by ``angle`` radians about ``center`` in raster (x right, y down) coordinates."""
    if angle == 0.0:
        return img
    src_y, src_x = rotation_source_coordinates(img.shape, angle, center)
    sampled = ndimage.map_coordinates(img.pixels, [src_y, src_x], order=1, mode="constant", cval=0.0)
    return GrayImage.from_array(sampled)


def rotate_mask(mask: BinaryMask, angle: float, center: tuple[float, float]) -> BinaryMask:
    rotated = rotate_about(GrayImage(pixels=mask.bits.astype(np.float64)), angle, center)
    return BinaryMask(bits=rotated.pixels >= 0.5)


def _tile_edges(length: int, tile_size: int) -> np.ndarray:
    count = max(1, length // tile_size)
    edges = np.arange(count + 1) * tile_size
    edges[-1] = length
    return edges


def _blend_axis(length: int, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lower tile index, upper tile index and upper weight per pixel along one axis."""
    positions = np.arange(length, dtype=np.float64)
    if len(centers) == 1:
        zeros = np.zeros(length, dtype=np.int64)
        return zeros, zeros, np.zeros(length)
    lower = np.clip(np.searchsorted(centers, positions, side="right") - 1, 0, len(centers) - 2)
    upper = lower + 1
    weight = np.clip((positions - centers[lower]) / (centers[upper] - centers[lower]), 0.0, 1.0)
    return lower, upper, weight


def _apply_stretch(values: np.ndarray, low: np.ndarray, high: np.ndarray) -> np.ndarray:
    span = high - low
    flat = span <= _FLAT_RANGE
    stretched = np.clip((values - low) / np.where(flat, 1.0, span), 0.0, 1.0)
    return np.where(flat, values, stretched)


def tile_contrast_enhance(img: GrayImage, tile_size: int = 16, clip_fraction: float = 0.98) -> GrayImage:
    """Clip-limited linear stretch per tile, blended bilinearly between tile centers.

    Each tile maps its central ``clip_fraction`` intensity quantile range onto
    [0, 1]. A pixel's output blends the mappings of its four nearest tile
    centers. Tiles without contrast map as the identity.
    """
    if tile_size < MIN_TILE_SIZE or tile_size > min(img.width, img.height):
        raise ParameterError(
            f"tile_size must lie in [{MIN_TILE_SIZE}, {min(img.width, img.height)}] for this image, got {tile_size}"
        )
    if not (0.0 < clip_fraction <= 1.0):
        raise ParameterError(f"clip_fraction must lie in (0, 1], got {clip_fraction}")

    row_edges = _tile_edges(img.height, tile_size)
    col_edges = _tile_edges(img.width, tile_size)
    tail = (1.0 - clip_fraction) / 2.0
    lows = np.empty((len(row_edges) - 1, len(col_edges) - 1))
    highs = np.empty_like(lows)
    for i in range(lows.shape[0]):
        for j in range(lows.shape[1]):
            tile = img.pixels[row_edges[i] : row_edges[i + 1], col_edges[j] : col_edges[j + 1]]
            lows[i, j], highs[i, j] = np.quantile(tile, [tail, 1.0 - tail])

    row_centers = (row_edges[:-1] + row_edges[1:] - 1) / 2.0
    col_centers = (col_edges[:-1] + col_edges[1:] - 1) / 2.0
    r0, r1, wy = _blend_axis(img.height, row_centers)
    c0, c1, wx = _blend_axis(img.width, col_centers)
    wy, wx = wy[:, None], wx[None, :]

    pixels = img.pixels
    blended = (
        (1 - wy) * (1 - wx) * _apply_stretch(pixels, lows[np.ix_(r0, c0)], highs[np.ix_(r0, c0)])
        + (1 - wy) * wx * _apply_stretch(pixels, lows[np.ix_(r0, c1)], highs[np.ix_(r0, c1)])
        + wy * (1 - wx) * _apply_stretch(pixels, lows[np.ix_(r1, c0)], highs[np.ix_(r1, c0)])
        + wy * wx * _apply_stretch(pixels, lows[np.ix_(r1, c1)], highs[np.ix_(r1, c1)])
    )
    return GrayImage.from_array(blended)
