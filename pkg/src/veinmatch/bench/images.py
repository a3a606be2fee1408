"""Rendered raster fixtures: NIR-like palm images, a Gaussian blob and a blob texture.

The palm is a four-finger hand silhouette on a 480x600 canvas with dark,
blurred vein polylines and dark oriented spots inside the region the ROI
covers. Each (subject, hand) gets its own pattern; each sample gets its own
pose jitter and sensor noise.
"""

import math
from pathlib import Path

import cv2
import numpy as np
import structlog
from scipy import ndimage

from veinmatch.errors import ParameterError
from veinmatch.models.enums import Hand
from veinmatch.models.evaluation import DatasetManifest, ManifestEntry
from veinmatch.models.image import BinaryMask, GrayImage
from veinmatch.models.synthetic import HandPose, PalmPattern
from veinmatch.services.manifest import write_manifest_csv
from veinmatch.vision.image_io import write_image
from veinmatch.vision.imagecore import blur_array, rotate_point

CANVAS_WIDTH = 480
CANVAS_HEIGHT = 600
PALM_BOX = (96, 260, 360, 560)
# (x0, x1, top) per finger, index to little
FINGERS = ((100, 160, 120), (168, 228, 100), (236, 296, 105), (304, 356, 170))
TIP_RADIUS = 30.0
BACKGROUND_LEVEL = 0.08
PALM_LEVEL = 0.85
# palm pixels never drop below PALM_LEVEL - DARKNESS_RANGE, well clear of the background
DARKNESS_RANGE = 0.35
VEIN_COUNT = 6
VEIN_BLUR_SIGMA = 1.5
SPOT_SPACING = 20.0
# keeps spots clear of the eroded ROI border
SPOT_INSET = 10.0
SPOT_MINOR_SIGMA = (3.0, 4.0)
BLOB_ELONGATION = (1.3, 1.6)
SPOT_DEPTH = (0.6, 0.9)
TEXTURE_SPACING = 6.0
TEXTURE_AMPLITUDE = (0.36, 0.44)
GRID_JITTER = 0.1
MAX_POSE_ANGLE = math.radians(3.0)
MAX_POSE_SHIFT = 4.0


def canvas_center() -> tuple[float, float]:
    return (CANVAS_WIDTH - 1) / 2.0, (CANVAS_HEIGHT - 1) / 2.0


def hand_membership(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Whether canonical-pose coordinates fall inside the hand silhouette."""
    x0, y0, x1, y1 = PALM_BOX
    inside = (x >= x0) & (x < x1) & (y >= y0) & (y < y1)
    for fx0, fx1, top in FINGERS:
        radius = min(TIP_RADIUS, (fx1 - fx0) / 2.0)
        cx = (fx0 + fx1 - 1) / 2.0
        cy = top + radius
        shaft = (x >= fx0) & (x < fx1) & (y >= cy) & (y < y1)
        tip = (x - cx) ** 2 + (y - cy) ** 2 <= radius * radius
        inside |= shaft | tip
    return inside


def _canonical_grid(pose: HandPose) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.meshgrid(
        np.arange(CANVAS_HEIGHT, dtype=np.float64),
        np.arange(CANVAS_WIDTH, dtype=np.float64),
        indexing="ij",
    )
    cx, cy = canvas_center()
    dx, dy = cols - pose.dx - cx, rows - pose.dy - cy
    cos_a, sin_a = math.cos(pose.angle), math.sin(pose.angle)
    return cos_a * dx + sin_a * dy + cx, -sin_a * dx + cos_a * dy + cy


def posed_point(point: tuple[float, float], pose: HandPose) -> tuple[float, float]:
    """Where a canonical-pose point lands after ``pose`` is applied."""
    x, y = rotate_point(point, pose.angle, canvas_center())
    return x + pose.dx, y + pose.dy


def canonical_valleys() -> tuple[tuple[float, float], tuple[float, float]]:
    """Bottoms of the index-middle and middle-ring gaps."""
    palm_top = float(PALM_BOX[1])
    left = ((FINGERS[0][1] + FINGERS[1][0] - 1) / 2.0, palm_top)
    right = ((FINGERS[1][1] + FINGERS[2][0] - 1) / 2.0, palm_top)
    return left, right


def canonical_roi_box() -> tuple[float, float, float, float]:
    """(x0, y0, x1, y1) of the top-anchored 2D x 2D square below the canonical valleys."""
    (lx, ly), (rx, _) = canonical_valleys()
    half = rx - lx
    mid_x = (lx + rx) / 2.0
    return mid_x - half, ly, mid_x + half, ly + 2.0 * half


def render_hand_mask(pose: HandPose | None = None) -> BinaryMask:
    x, y = _canonical_grid(pose or HandPose())
    return BinaryMask(bits=hand_membership(x, y))


def blob_grid(
    rng: np.random.Generator,
    box: tuple[float, float, float, float],
    spacing: float,
    minor_sigma: tuple[float, float],
    amplitude: tuple[float, float],
    signed: bool = False,
) -> np.ndarray:
    """Oriented Gaussian blobs on a jittered grid; rows are (x, y, minor, major, angle, amplitude)."""
    x0, y0, x1, y1 = box
    xs = np.arange(x0 + spacing / 2.0, x1, spacing)
    ys = np.arange(y0 + spacing / 2.0, y1, spacing)
    centers = np.array([(x, y) for y in ys for x in xs], dtype=np.float64).reshape(-1, 2)
    n = len(centers)
    centers = centers + rng.uniform(-GRID_JITTER * spacing, GRID_JITTER * spacing, size=(n, 2))
    minor = rng.uniform(*minor_sigma, size=n)
    major = minor * rng.uniform(*BLOB_ELONGATION, size=n)
    angle = rng.uniform(0.0, math.pi, size=n)
    strength = rng.uniform(*amplitude, size=n)
    if signed:
        strength = strength * rng.choice([-1.0, 1.0], size=n)
    return np.column_stack([centers, minor, major, angle, strength])


def stamp_blobs(field: np.ndarray, blobs: np.ndarray) -> np.ndarray:
    """``field`` plus every blob, each evaluated within four major sigmas of its center."""
    out = np.array(field, dtype=np.float64, copy=True)
    height, width = out.shape
    for x, y, minor, major, angle, amplitude in blobs:
        reach = int(math.ceil(4.0 * major))
        c0, c1 = max(int(x) - reach, 0), min(int(x) + reach + 1, width)
        r0, r1 = max(int(y) - reach, 0), min(int(y) + reach + 1, height)
        if c0 >= c1 or r0 >= r1:
            continue
        rows, cols = np.mgrid[r0:r1, c0:c1].astype(np.float64)
        dx, dy = cols - x, rows - y
        cos_a, sin_a = math.cos(angle), math.sin(angle)
        along = cos_a * dx + sin_a * dy
        across = -sin_a * dx + cos_a * dy
        out[r0:r1, c0:c1] += amplitude * np.exp(-0.5 * ((along / major) ** 2 + (across / minor) ** 2))
    return out


def vein_pattern(rng: np.random.Generator, count: int = VEIN_COUNT) -> PalmPattern:
    """Random-walk veins starting inside the ROI region, plus a grid of dark spots covering it."""
    x0, y0, x1, y1 = canonical_roi_box()
    px0, py0, px1, py1 = PALM_BOX
    veins = []
    for _ in range(count):
        point = np.array([rng.uniform(x0 + 10, x1 - 10), rng.uniform(y0 + 10, y1 - 10)])
        heading = rng.uniform(0.0, 2.0 * math.pi)
        vertices = [point.copy()]
        for _ in range(int(rng.integers(4, 8))):
            heading += rng.normal(0.0, 0.5)
            step = rng.uniform(20.0, 40.0)
            point = point + step * np.array([math.cos(heading), math.sin(heading)])
            point = np.clip(point, [px0 - 20, py0 - 60], [px1 + 20, py1 + 20])
            vertices.append(point.copy())
        veins.append(np.array(vertices))
    inset = SPOT_INSET
    spots = blob_grid(rng, (x0 + inset, y0 + inset, x1 - inset, y1 - inset), SPOT_SPACING, SPOT_MINOR_SIGMA, SPOT_DEPTH)
    return PalmPattern(veins=veins, spots=spots)


def vein_raster(pattern: PalmPattern) -> np.ndarray:
    """Darkness in [0, 1] on the canonical canvas."""
    canvas = np.zeros((CANVAS_HEIGHT, CANVAS_WIDTH), dtype=np.uint8)
    for vein in pattern.veins:
        points = np.rint(vein).astype(np.int32).reshape(-1, 1, 2)
        cv2.polylines(canvas, [points], isClosed=False, color=255, thickness=3, lineType=cv2.LINE_AA)
    lines = blur_array(canvas.astype(np.float64) / 255.0, VEIN_BLUR_SIGMA)
    return np.clip(stamp_blobs(lines, pattern.spots), 0.0, 1.0)


def render_palm(
    veins: np.ndarray,
    pose: HandPose | None = None,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> GrayImage:
    """Render a posed palm from a precomputed ``vein_raster``."""
    x, y = _canonical_grid(pose or HandPose())
    inside = hand_membership(x, y)
    darkness = ndimage.map_coordinates(veins, [y, x], order=1, mode="constant", cval=0.0)
    pixels = np.where(inside, PALM_LEVEL - DARKNESS_RANGE * darkness, BACKGROUND_LEVEL)
    if noise_sigma > 0:
        rng = rng or np.random.default_rng(0)
        pixels = pixels + rng.normal(0.0, noise_sigma, size=pixels.shape)
    return GrayImage.from_array(pixels)


def random_pose(rng: np.random.Generator) -> HandPose:
    return HandPose(
        angle=float(rng.uniform(-MAX_POSE_ANGLE, MAX_POSE_ANGLE)),
        dx=float(rng.uniform(-MAX_POSE_SHIFT, MAX_POSE_SHIFT)),
        dy=float(rng.uniform(-MAX_POSE_SHIFT, MAX_POSE_SHIFT)),
    )


def gaussian_blob(
    size: int = 64,
    sigma: float = 4.0,
    center: tuple[float, float] | None = None,
    peak: float = 0.8,
    background: float = 0.1,
) -> GrayImage:
    """A single bright isotropic blob on a dark background."""
    cx, cy = center or ((size - 1) / 2.0, (size - 1) / 2.0)
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    blob = np.exp(-((cols - cx) ** 2 + (rows - cy) ** 2) / (2.0 * sigma * sigma))
    return GrayImage.from_array(background + (peak - background) * blob)


def _texture_field(height: int, width: int, seed: int, sigma: float) -> np.ndarray:
    rng = np.random.default_rng(seed)
    blobs = blob_grid(
        rng,
        (0.0, 0.0, float(width), float(height)),
        TEXTURE_SPACING * sigma,
        (0.9 * sigma, 1.2 * sigma),
        TEXTURE_AMPLITUDE,
        signed=True,
    )
    return np.clip(stamp_blobs(np.full((height, width), 0.5), blobs), 0.0, 1.0)


def texture_fixture(size: int = 128, seed: int = 0, sigma: float = 2.0) -> GrayImage:
    """Bright and dark elongated blobs around mid-gray, roughly ``sigma`` wide; keypoint-rich and deterministic."""
    return GrayImage.from_array(_texture_field(size, size, seed, sigma))


def texture_pair(
    size: int = 128,
    shift: tuple[int, int] = (8, 4),
    seed: int = 0,
    sigma: float = 2.0,
) -> tuple[GrayImage, GrayImage]:
    """Two windows of one texture; content at (x, y) in the first sits at (x + dx, y + dy) in the second."""
    dx, dy = shift
    margin = max(abs(dx), abs(dy))
    field = _texture_field(size + 2 * margin, size + 2 * margin, seed, sigma)
    first = field[margin : margin + size, margin : margin + size]
    second = field[margin - dy : margin - dy + size, margin - dx : margin - dx + size]
    return GrayImage.from_array(first), GrayImage.from_array(second)


def sample_file_name(subject: int, hand: Hand, sample: int) -> str:
    """CASIA-style ``NNN_h_850_SS.png``."""
    return f"{subject:03d}_{hand.value[0]}_850_{sample:02d}.png"


class SyntheticPalmDataset:
    """Writes a seeded palm dataset and its manifest CSV."""

    def __init__(
        self,
        n_subjects: int = 8,
        samples_per_hand: int = 3,
        hands: tuple[Hand, ...] = (Hand.LEFT, Hand.RIGHT),
        noise_sigma: float = 0.01,
        seed: int = 0,
        logger: structlog.stdlib.BoundLogger | None = None,
    ) -> None:
        if n_subjects < 1 or samples_per_hand < 1 or not hands:
            raise ParameterError("need at least one subject, hand and sample")
        self._n_subjects = n_subjects
        self._samples_per_hand = samples_per_hand
        self._hands = hands
        self._noise_sigma = noise_sigma
        self._seed = seed
        self._logger = logger or structlog.get_logger(__name__)

    def write(self, out_dir: Path) -> DatasetManifest:
        out_dir.mkdir(parents=True, exist_ok=True)
        entries = []
        for subject in range(1, self._n_subjects + 1):
            for hand_index, hand in enumerate(self._hands):
                identity_rng = np.random.default_rng([self._seed, subject, hand_index])
                veins = vein_raster(vein_pattern(identity_rng))
                for sample in range(1, self._samples_per_hand + 1):
                    sample_rng = np.random.default_rng([self._seed, subject, hand_index, sample])
                    image = render_palm(veins, random_pose(sample_rng), self._noise_sigma, sample_rng)
                    path = out_dir / sample_file_name(subject, hand, sample)
                    write_image(path, image)
                    entries.append(
                        ManifestEntry(
                            image_path=str(path),
                            subject_id=f"{subject:03d}",
                            hand=hand,
                            sample_index=sample,
                        )
                    )
        manifest = DatasetManifest(entries=entries, parsing_rule="csv")
        write_manifest_csv(manifest, out_dir / "manifest.csv")
        self._logger.info(
            "synthetic_dataset_written",
            out_dir=str(out_dir),
            subjects=self._n_subjects,
            images=len(entries),
        )
        return manifest
