"""Palm segmentation geometry: outer contour, convex hull, valley points, aligned ROI crop."""

import math

import cv2
import numpy as np
from scipy.spatial import ConvexHull, QhullError

from veinmatch.errors import DegenerateGeometryError, GeometryError, SegmentationError, ValleyDetectionError
from veinmatch.models.enums import RoiAnchor
from veinmatch.models.geometry import Contour, RoiGeometry, ValleyCandidate
from veinmatch.models.image import BinaryMask, GrayImage
from veinmatch.vision.imagecore import rotate_about, rotate_mask, rotate_point

MIN_COMPONENT_AREA = 64
DEFECT_DEPTH_FRACTION = 0.05
MIN_VALLEY_DISTANCE = 16.0
VALLEY_SPAN_FRACTION = 0.5


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def trace_outer_contour(mask: BinaryMask, min_area: int = MIN_COMPONENT_AREA) -> Contour:
    """Outer border of the largest 8-connected component, counter-clockwise."""
    bits = mask.bits.astype(np.uint8)
    count, labels, stats, _ = cv2.connectedComponentsWithStats(bits, connectivity=8)
    if count < 2:
        raise SegmentationError("mask has no foreground component")
    areas = stats[1:, cv2.CC_STAT_AREA]
    largest = int(np.argmax(areas))
    if areas[largest] < min_area:
        raise SegmentationError(f"largest component has {int(areas[largest])} pixels, need {min_area}")

    component = (labels == largest + 1).astype(np.uint8)
    contours, _ = cv2.findContours(component, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_NONE)
    border = max(contours, key=len).reshape(-1, 2).astype(np.float64)
    contour = Contour(points=border)
    if contour.signed_area() < 0:
        contour = Contour(points=border[::-1])
    return contour


def convex_hull(contour: Contour) -> Contour:
    """Hull vertices (a subset of the input points), counter-clockwise."""
    points = contour.points
    try:
        hull = ConvexHull(points)
    except QhullError as exc:
        raise DegenerateGeometryError("points are collinear or coincident") from exc
    return Contour(points=points[hull.vertices])


def _contour_indices(contour: Contour, hull: Contour) -> np.ndarray:
    indices = []
    for vertex in hull.points:
        hits = np.flatnonzero(np.all(contour.points == vertex, axis=1))
        if hits.size == 0:
            raise DegenerateGeometryError(f"hull vertex {tuple(vertex)} is not a contour point")
        indices.append(int(hits[0]))
    return np.unique(indices)


def detect_valley_points(
    contour: Contour,
    hull: Contour,
    depth_fraction: float = DEFECT_DEPTH_FRACTION,
) -> list[ValleyCandidate]:
    """Deepest contour point under each hull edge, deepest first.

    Candidates shallower than ``depth_fraction`` of the hull perimeter are
    discarded.
    """
    anchors = _contour_indices(contour, hull)
    n = len(contour)
    min_depth = depth_fraction * hull.perimeter()
    candidates: list[ValleyCandidate] = []
    for position, start in enumerate(anchors):
        end = anchors[(position + 1) % len(anchors)]
        if end <= start:
            end += n
        if end - start < 2:
            continue
        a = contour.points[start]
        b = contour.points[end % n]
        edge = b - a
        edge_length = float(np.hypot(edge[0], edge[1]))
        if edge_length == 0:
            continue
        arc = contour.points[np.arange(start + 1, end) % n]
        offsets = arc - a
        depths = np.abs(edge[0] * offsets[:, 1] - edge[1] * offsets[:, 0]) / edge_length
        deepest = int(np.argmax(depths))
        depth = float(depths[deepest])
        if depth < min_depth:
            continue
        x, y = arc[deepest]
        candidates.append(ValleyCandidate(x=float(x), y=float(y), depth=depth, span=abs(float(edge[0]))))

    candidates.sort(key=lambda candidate: candidate.depth, reverse=True)
    if len(candidates) < 2:
        raise ValleyDetectionError(f"found {len(candidates)} valley candidates, need 2")
    return candidates


def select_valley_pair(
    candidates: list[ValleyCandidate],
    span_fraction: float = VALLEY_SPAN_FRACTION,
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Pick (left, right) valleys: the two deepest whose span exceeds a fraction of the deepest's."""
    if not candidates:
        raise ValleyDetectionError("no valley candidates")
    ordered = sorted(candidates, key=lambda candidate: candidate.depth, reverse=True)
    deepest = ordered[0]
    eligible = [deepest] + [c for c in ordered[1:] if c.span > span_fraction * deepest.span]
    if len(eligible) < 2:
        raise ValleyDetectionError("fewer than two valleys pass the span rule")
    first, second = eligible[0], eligible[1]
    left, right = sorted((first, second), key=lambda candidate: candidate.x)
    return left.point, right.point


def _inside(point: tuple[float, float], img: GrayImage) -> bool:
    return 0.0 <= point[0] < img.width and 0.0 <= point[1] < img.height


def _crop(values: np.ndarray, x0: int, y0: int, side: int) -> np.ndarray:
    out = np.zeros((side, side), dtype=values.dtype)
    height, width = values.shape
    src_x0, src_y0 = max(x0, 0), max(y0, 0)
    src_x1, src_y1 = min(x0 + side, width), min(y0 + side, height)
    if src_x1 > src_x0 and src_y1 > src_y0:
        out[src_y0 - y0 : src_y1 - y0, src_x0 - x0 : src_x1 - x0] = values[src_y0:src_y1, src_x0:src_x1]
    return out


def extract_roi(
    img: GrayImage,
    mask: BinaryMask,
    left: tuple[float, float],
    right: tuple[float, float],
    anchor: RoiAnchor = RoiAnchor.TOP,
) -> tuple[GrayImage, BinaryMask, RoiGeometry]:
    """Rotate the valleys onto a horizontal line and crop the 2D x 2D square.

    With the ``top`` anchor the square's top edge passes through the valley
    midpoint; with ``center`` the square is centered on it. Regions outside the
    source are zero-filled.
    """
    if mask.shape != img.shape:
        raise GeometryError(f"mask shape {mask.shape} does not match image shape {img.shape}")
    if not (_inside(left, img) and _inside(right, img)):
        raise GeometryError(f"valley points {left}, {right} must lie inside the image")
    if not left[0] < right[0]:
        raise GeometryError(f"left valley x={left[0]} must be smaller than right valley x={right[0]}")

    rotation = -math.atan2(right[1] - left[1], right[0] - left[0])
    midpoint = ((left[0] + right[0]) / 2.0, (left[1] + right[1]) / 2.0)
    aligned_left = rotate_point(left, rotation, midpoint)
    aligned_right = rotate_point(right, rotation, midpoint)
    unit_d = aligned_right[0] - aligned_left[0]
    if unit_d < MIN_VALLEY_DISTANCE:
        raise GeometryError(f"valley distance {unit_d:.2f} px is below {MIN_VALLEY_DISTANCE}")

    half = _round_half_up(unit_d)
    side = 2 * half
    x0 = _round_half_up(midpoint[0]) - half
    y0 = _round_half_up(midpoint[1])
    if anchor is RoiAnchor.CENTER:
        y0 -= half

    rotated = rotate_about(img, rotation, midpoint)
    rotated_mask = rotate_mask(mask, rotation, midpoint)
    roi = GrayImage(pixels=_crop(rotated.pixels, x0, y0, side))
    roi_mask = BinaryMask(bits=_crop(rotated_mask.bits, x0, y0, side))
    geometry = RoiGeometry(
        left_valley=left,
        right_valley=right,
        aligned_left=aligned_left,
        aligned_right=aligned_right,
        rotation=rotation,
        unit_d=unit_d,
        origin=(x0, y0),
        side=side,
    )
    return roi, roi_mask, geometry
