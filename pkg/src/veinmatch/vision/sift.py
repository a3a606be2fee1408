"""Scale-invariant feature transform on numpy arrays.

Gaussian and difference-of-Gaussian scale space, 26-neighbourhood extremum
detection with quadratic localization, contrast and edge rejection, dominant
orientation assignment and the 4x4x8 gradient-histogram descriptor.

Orientations follow raster coordinates (x right, y down), the same convention
as ``imagecore.gradients`` and ``imagecore.rotate_about``.
"""

import math

import numpy as np
import structlog
from pydantic import Field, field_validator
from scipy import ndimage

from veinmatch.errors import ParameterError
from veinmatch.models.base import ArrayModel
from veinmatch.models.features import DESCRIPTOR_LENGTH, FeatureSet, Keypoint, SiftParams
from veinmatch.models.image import BinaryMask, GrayImage
from veinmatch.vision.imagecore import blur_array

ORIENTATION_BINS = 36
ORIENTATION_SIGMA_FACTOR = 1.5
ORIENTATION_RADIUS_FACTOR = 3.0
ORIENTATION_PEAK_RATIO = 0.8
DESCRIPTOR_WIDTH = 4
DESCRIPTOR_BINS = 8
DESCRIPTOR_SCALE_FACTOR = 3.0
DESCRIPTOR_CLAMP = 0.2
_SMOOTHING = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
_TWO_PI = 2.0 * math.pi


class Octave(ArrayModel):
    """One octave: ``s + 3`` Gaussian images and ``s + 2`` DoG images.

    ``index`` is -1 for the doubled input, otherwise 0, 1, ...
    """

    index: int
    gaussians: list[np.ndarray]
    dogs: list[np.ndarray]

    @property
    def step(self) -> float:
        """Original-image pixels per octave pixel."""
        return 2.0**self.index

    @property
    def shape(self) -> tuple[int, int]:
        return self.gaussians[0].shape


class ScaleSpace(ArrayModel):
    params: SiftParams
    octaves: list[Octave] = Field(min_length=1)
    image_shape: tuple[int, int]

    @field_validator("octaves")
    @classmethod
    def _validate_octaves(cls, value: list[Octave]) -> list[Octave]:
        for octave in value:
            if len(octave.dogs) != len(octave.gaussians) - 1:
                raise ValueError("each octave needs exactly one DoG image per adjacent Gaussian pair")
        return value


def _octave_sigmas(params: SiftParams) -> np.ndarray:
    """Absolute blur of each Gaussian image within an octave, in octave pixels."""
    k = 2.0 ** (1.0 / params.scales_per_octave)
    return params.sigma0 * k ** np.arange(params.scales_per_octave + 3)


def build_dog_scale_space(img: GrayImage, params: SiftParams | None = None) -> ScaleSpace:
    params = params or SiftParams()
    if min(img.shape) < SiftParams.MIN_DIMENSION:
        raise ParameterError(f"image {img.width}x{img.height} is below the {SiftParams.MIN_DIMENSION} px minimum")

    base = img.pixels
    assumed_blur = params.assumed_blur
    first_index = 0
    if params.double_input:
        base = ndimage.zoom(base, 2.0, order=1, mode="nearest", grid_mode=True)
        assumed_blur *= 2.0
        first_index = -1
    base = blur_array(base, math.sqrt(params.sigma0**2 - assumed_blur**2))

    sigmas = _octave_sigmas(params)
    increments = np.sqrt(sigmas[1:] ** 2 - sigmas[:-1] ** 2)
    octaves: list[Octave] = []
    current = base
    while min(current.shape) >= SiftParams.MIN_DIMENSION:
        if params.n_octaves is not None and len(octaves) >= params.n_octaves:
            break
        gaussians = [current]
        for increment in increments:
            gaussians.append(blur_array(gaussians[-1], float(increment)))
        dogs = [upper - lower for lower, upper in zip(gaussians, gaussians[1:])]
        octaves.append(Octave(index=first_index + len(octaves), gaussians=gaussians, dogs=dogs))
        current = gaussians[params.scales_per_octave][::2, ::2]

    return ScaleSpace(params=params, octaves=octaves, image_shape=img.shape)


def _derivatives(cube: np.ndarray, layer: int, row: int, col: int) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian in (x, y, scale) order by central differences."""
    p = cube[layer - 1 : layer + 2, row - 1 : row + 2, col - 1 : col + 2]
    center = p[1, 1, 1]
    gradient = 0.5 * np.array([p[1, 1, 2] - p[1, 1, 0], p[1, 2, 1] - p[1, 0, 1], p[2, 1, 1] - p[0, 1, 1]])
    dxx = p[1, 1, 2] - 2 * center + p[1, 1, 0]
    dyy = p[1, 2, 1] - 2 * center + p[1, 0, 1]
    dss = p[2, 1, 1] - 2 * center + p[0, 1, 1]
    dxy = 0.25 * (p[1, 2, 2] - p[1, 2, 0] - p[1, 0, 2] + p[1, 0, 0])
    dxs = 0.25 * (p[2, 1, 2] - p[2, 1, 0] - p[0, 1, 2] + p[0, 1, 0])
    dys = 0.25 * (p[2, 2, 1] - p[2, 0, 1] - p[0, 2, 1] + p[0, 0, 1])
    hessian = np.array([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])
    return gradient, hessian


def passes_edge_test(hessian_xy: np.ndarray, edge_ratio: float) -> bool:
    """Principal-curvature ratio test on the 2x2 spatial Hessian."""
    trace = hessian_xy[0, 0] + hessian_xy[1, 1]
    det = hessian_xy[0, 0] * hessian_xy[1, 1] - hessian_xy[0, 1] ** 2
    if det <= 0:
        return False
    return edge_ratio * trace**2 < (edge_ratio + 1) ** 2 * det


def _localize(
    cube: np.ndarray, layer: int, row: int, col: int, params: SiftParams
) -> tuple[int, int, int, np.ndarray, float, np.ndarray] | None:
    height, width = cube.shape[1:]
    border = params.border
    for _ in range(params.max_interpolation_steps):
        gradient, hessian = _derivatives(cube, layer, row, col)
        try:
            offset = -np.linalg.solve(hessian, gradient)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(offset)):
            return None
        if np.all(np.abs(offset) < 0.5):
            value = cube[layer, row, col] + 0.5 * float(gradient @ offset)
            return layer, row, col, offset, value, hessian
        col += int(round(offset[0]))
        row += int(round(offset[1]))
        layer += int(round(offset[2]))
        if not (1 <= layer <= params.scales_per_octave):
            return None
        if not (border <= row < height - border and border <= col < width - border):
            return None
    return None


def detect_keypoints(space: ScaleSpace, params: SiftParams | None = None) -> list[Keypoint]:
    """Localized, contrast- and edge-filtered DoG extrema without orientation."""
    params = params or space.params
    s = params.scales_per_octave
    keypoints: list[Keypoint] = []
    for octave in space.octaves:
        cube = np.stack(octave.dogs)
        height, width = cube.shape[1:]
        border = params.border
        if height <= 2 * border or width <= 2 * border:
            continue
        is_max = cube == ndimage.maximum_filter(cube, size=3, mode="nearest")
        is_min = cube == ndimage.minimum_filter(cube, size=3, mode="nearest")
        candidates = (is_max | is_min) & (np.abs(cube) >= 0.5 * params.contrast_threshold)
        candidates[0] = False
        candidates[s + 1 :] = False
        candidates[:, :border, :] = False
        candidates[:, height - border :, :] = False
        candidates[:, :, :border] = False
        candidates[:, :, width - border :] = False

        seen: set[tuple[int, int, int]] = set()
        for layer, row, col in np.argwhere(candidates):
            located = _localize(cube, int(layer), int(row), int(col), params)
            if located is None:
                continue
            layer_i, row_i, col_i, offset, value, hessian = located
            if (layer_i, row_i, col_i) in seen:
                continue
            if abs(value) < params.contrast_threshold:
                continue
            if not passes_edge_test(hessian[:2, :2], params.edge_ratio):
                continue
            seen.add((layer_i, row_i, col_i))
            x = (col_i + offset[0]) * octave.step
            y = (row_i + offset[1]) * octave.step
            if not (0 <= x < space.image_shape[1] and 0 <= y < space.image_shape[0]):
                continue
            scale = params.sigma0 * 2.0 ** ((layer_i + offset[2]) / s) * octave.step
            keypoints.append(
                Keypoint(x=float(x), y=float(y), scale=float(scale), response=float(abs(value)), octave=octave.index)
            )
    return keypoints


def _octave_of(space: ScaleSpace, keypoint: Keypoint) -> Octave:
    for octave in space.octaves:
        if octave.index == keypoint.octave:
            return octave
    raise ParameterError(f"keypoint octave {keypoint.octave} is not part of this scale space")


def _gaussian_for(space: ScaleSpace, octave: Octave, keypoint: Keypoint) -> tuple[np.ndarray, float]:
    """Gaussian image nearest the keypoint's scale and the scale in octave pixels."""
    sigma_octave = keypoint.scale / octave.step
    layer = int(round(space.params.scales_per_octave * math.log2(sigma_octave / space.params.sigma0)))
    layer = min(max(layer, 0), len(octave.gaussians) - 1)
    return octave.gaussians[layer], sigma_octave


def _wrap_angle(angle: float) -> float:
    wrapped = (angle + math.pi) % _TWO_PI - math.pi
    return -math.pi if wrapped >= math.pi else wrapped


def orientation_histogram(gaussian: np.ndarray, x: float, y: float, sigma: float) -> np.ndarray:
    """Smoothed 36-bin histogram of Gaussian-weighted gradient orientations around (x, y)."""
    height, width = gaussian.shape
    weight_sigma = ORIENTATION_SIGMA_FACTOR * sigma
    radius = int(round(ORIENTATION_RADIUS_FACTOR * weight_sigma))
    cx, cy = int(round(x)), int(round(y))
    rows, cols = np.meshgrid(
        np.arange(max(cy - radius, 1), min(cy + radius, height - 2) + 1),
        np.arange(max(cx - radius, 1), min(cx + radius, width - 2) + 1),
        indexing="ij",
    )
    histogram = np.zeros(ORIENTATION_BINS)
    if rows.size == 0:
        return histogram
    gx = gaussian[rows, cols + 1] - gaussian[rows, cols - 1]
    gy = gaussian[rows + 1, cols] - gaussian[rows - 1, cols]
    magnitude = np.hypot(gx, gy)
    angle = np.arctan2(gy, gx)
    weight = np.exp(-((cols - x) ** 2 + (rows - y) ** 2) / (2.0 * weight_sigma**2))
    bins = np.rint(angle * ORIENTATION_BINS / _TWO_PI).astype(np.int64) % ORIENTATION_BINS
    histogram = np.bincount(bins.ravel(), weights=(weight * magnitude).ravel(), minlength=ORIENTATION_BINS)
    return ndimage.convolve1d(histogram, _SMOOTHING, mode="wrap")


def dominant_orientations(histogram: np.ndarray) -> list[float]:
    """Interpolated peaks within 80% of the maximum, as angles in [-pi, pi)."""
    peak = histogram.max()
    if peak <= 0:
        return []
    left, right = np.roll(histogram, 1), np.roll(histogram, -1)
    angles = []
    peaks = (histogram > left) & (histogram > right) & (histogram >= ORIENTATION_PEAK_RATIO * peak)
    for index in np.flatnonzero(peaks):
        l_value, c_value, r_value = left[index], histogram[index], right[index]
        position = index + 0.5 * (l_value - r_value) / (l_value - 2.0 * c_value + r_value)
        angles.append(_wrap_angle(position * _TWO_PI / ORIENTATION_BINS))
    return angles


def _descriptor(gaussian: np.ndarray, x: float, y: float, sigma: float, orientation: float) -> np.ndarray:
    d, n = DESCRIPTOR_WIDTH, DESCRIPTOR_BINS
    height, width = gaussian.shape
    hist_width = DESCRIPTOR_SCALE_FACTOR * sigma
    radius = int(round(hist_width * math.sqrt(2.0) * (d + 1) * 0.5))
    radius = min(radius, int(math.hypot(height, width)))
    cx, cy = int(round(x)), int(round(y))
    offsets = np.arange(-radius, radius + 1)
    rows, cols = np.meshgrid(cy + offsets, cx + offsets, indexing="ij")
    cos_t, sin_t = math.cos(orientation), math.sin(orientation)
    dx, dy = cols - x, rows - y
    col_rot = (cos_t * dx + sin_t * dy) / hist_width
    row_rot = (-sin_t * dx + cos_t * dy) / hist_width
    row_bin = row_rot + 0.5 * d - 0.5
    col_bin = col_rot + 0.5 * d - 0.5
    valid = (
        (row_bin > -1)
        & (row_bin < d)
        & (col_bin > -1)
        & (col_bin < d)
        & (rows > 0)
        & (rows < height - 1)
        & (cols > 0)
        & (cols < width - 1)
    )
    vector = np.zeros(DESCRIPTOR_LENGTH)
    if not np.any(valid):
        return vector

    r, c = rows[valid], cols[valid]
    gx = gaussian[r, c + 1] - gaussian[r, c - 1]
    gy = gaussian[r + 1, c] - gaussian[r - 1, c]
    angle = np.mod(np.arctan2(gy, gx) - orientation, _TWO_PI)
    weight = np.exp(-(row_rot[valid] ** 2 + col_rot[valid] ** 2) / (2.0 * (0.5 * d) ** 2))
    values = weight * np.hypot(gx, gy)

    rb, cb, ob = row_bin[valid], col_bin[valid], angle * n / _TWO_PI
    r0, c0, o0 = np.floor(rb).astype(np.int64), np.floor(cb).astype(np.int64), np.floor(ob).astype(np.int64)
    fr, fc, fo = rb - r0, cb - c0, ob - o0
    histogram = np.zeros((d + 2, d + 2, n))
    for dr, wr in ((0, 1.0 - fr), (1, fr)):
        for dc, wc in ((0, 1.0 - fc), (1, fc)):
            for do, wo in ((0, 1.0 - fo), (1, fo)):
                np.add.at(histogram, (r0 + 1 + dr, c0 + 1 + dc, (o0 + do) % n), values * wr * wc * wo)

    vector = histogram[1:-1, 1:-1, :].ravel()
    norm = np.linalg.norm(vector)
    if norm == 0:
        return vector
    vector = np.minimum(vector / norm, DESCRIPTOR_CLAMP)
    return vector / np.linalg.norm(vector)


def describe_keypoints(
    space: ScaleSpace,
    keypoints: list[Keypoint],
    mask: BinaryMask | None = None,
    source_id: str = "",
    params: SiftParams | None = None,
) -> FeatureSet:
    """Assign orientations and build descriptors.

    A keypoint yields one oriented copy per histogram peak. With mask
    filtering enabled, keypoints outside ``mask`` are dropped first.
    """
    params = params or space.params
    if mask is not None and mask.shape != space.image_shape:
        raise ParameterError(f"mask shape {mask.shape} does not match image shape {space.image_shape}")

    oriented: list[Keypoint] = []
    descriptors: list[np.ndarray] = []
    for keypoint in keypoints:
        if params.mask_filtering and mask is not None and not mask.contains(keypoint.x, keypoint.y):
            continue
        octave = _octave_of(space, keypoint)
        gaussian, sigma = _gaussian_for(space, octave, keypoint)
        x, y = keypoint.x / octave.step, keypoint.y / octave.step
        for orientation in dominant_orientations(orientation_histogram(gaussian, x, y, sigma)):
            oriented.append(keypoint.model_copy(update={"orientation": orientation}))
            descriptors.append(_descriptor(gaussian, x, y, sigma, orientation))

    matrix = np.vstack(descriptors) if descriptors else np.zeros((0, DESCRIPTOR_LENGTH))
    return FeatureSet(source_id=source_id, keypoints=oriented, descriptors=matrix)


def root_sift(descriptor: np.ndarray) -> np.ndarray:
    """L1-normalize then take the square root; the zero vector is returned unchanged."""
    vector = np.asarray(descriptor, dtype=np.float64)
    l1 = np.abs(vector).sum()
    if l1 == 0:
        return vector.copy()
    return np.sqrt(np.abs(vector) / l1)


def root_sift_features(features: FeatureSet) -> FeatureSet:
    matrix = features.descriptors
    l1 = np.abs(matrix).sum(axis=1, keepdims=True)
    transformed = np.sqrt(np.abs(matrix) / np.where(l1 == 0, 1.0, l1))
    return FeatureSet(source_id=features.source_id, keypoints=features.keypoints, descriptors=transformed)


class SiftExtractor:
    """Runs scale space, detection and description for one image."""

    def __init__(
        self,
        params: SiftParams | None = None,
        logger: structlog.stdlib.BoundLogger | None = None,
    ) -> None:
        self._params = params or SiftParams()
        self._logger = logger or structlog.get_logger(__name__)

    @property
    def params(self) -> SiftParams:
        return self._params

    def extract(self, img: GrayImage, mask: BinaryMask | None = None, source_id: str = "") -> FeatureSet:
        space = build_dog_scale_space(img, self._params)
        keypoints = detect_keypoints(space, self._params)
        features = describe_keypoints(space, keypoints, mask=mask, source_id=source_id, params=self._params)
        self._logger.debug(
            "sift_extracted",
            source_id=source_id,
            octaves=len(space.octaves),
            extrema=len(keypoints),
            keypoints=len(features),
        )
        return features


def keypoint_array(keypoints: list[Keypoint]) -> np.ndarray:
    """(n, 4) array of x, y, scale, orientation."""
    if not keypoints:
        return np.zeros((0, 4))
    return np.array([(kp.x, kp.y, kp.scale, kp.orientation) for kp in keypoints], dtype=np.float64)
