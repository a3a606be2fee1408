"""Image-to-features pipeline.

Otsu matte, outer contour, convex hull and valley points (or a sidecar
annotation), aligned ROI crop, mask erosion and 60% resize, contrast
enhancement, then SIFT on the enhanced ROI.
"""

import asyncio
import json
from pathlib import Path

import structlog
from pydantic import BaseModel, ConfigDict, ValidationError

from veinmatch.errors import DegenerateGeometryError, GeometryError, SegmentationError, ValleyDetectionError
from veinmatch.models.config import PipelineConfig
from veinmatch.models.enums import ErosionOrder
from veinmatch.models.features import FeatureSet
from veinmatch.models.geometry import RoiGeometry, ValleyAnnotation
from veinmatch.models.image import BinaryMask, GrayImage
from veinmatch.vision.enhance import Enhancer, create_enhancer
from veinmatch.vision.image_io import read_image, write_image, write_mask
from veinmatch.vision.imagecore import erode, otsu_threshold, resize_bilinear, resize_mask
from veinmatch.vision.roi import (
    convex_hull,
    detect_valley_points,
    extract_roi,
    select_valley_pair,
    trace_outer_contour,
)
from veinmatch.vision.sift import SiftExtractor

SIDECAR_SUFFIX = ".valleys.json"


class ExtractionResult(BaseModel):
    """Every intermediate of one extraction, for debugging and visualization."""

    source_id: str
    features: FeatureSet
    palm_mask: BinaryMask
    roi: GrayImage
    roi_mask: BinaryMask
    enhanced: GrayImage
    geometry: RoiGeometry
    annotated: bool

    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)


def sidecar_path(image_path: Path) -> Path:
    """``palm.png`` -> ``palm.valleys.json`` next to the image."""
    return image_path.with_name(image_path.stem + SIDECAR_SUFFIX)


def load_sidecar(image_path: Path) -> ValleyAnnotation | None:
    path = sidecar_path(image_path)
    if not path.is_file():
        return None
    try:
        return ValleyAnnotation.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, ValidationError) as exc:
        raise GeometryError(f"invalid valley annotation {path}: {exc}") from exc


class FeatureExtractor:
    """Runs the ROI and SIFT pipeline configured by a PipelineConfig."""

    def __init__(
        self,
        config: PipelineConfig | None = None,
        enhancer: Enhancer | None = None,
        sift: SiftExtractor | None = None,
        logger: structlog.stdlib.BoundLogger | None = None,
    ) -> None:
        self._config = config or PipelineConfig()
        self._enhancer = enhancer or create_enhancer(self._config.enhancement)
        self._logger = logger or structlog.get_logger(__name__)
        self._sift = sift or SiftExtractor(self._config.sift, logger=self._logger)

    @property
    def config(self) -> PipelineConfig:
        return self._config

    def extract_image(
        self,
        img: GrayImage,
        source_id: str,
        annotation: ValleyAnnotation | None = None,
    ) -> ExtractionResult:
        roi_config = self._config.roi
        palm_mask = otsu_threshold(img)
        if annotation is not None:
            left, right = annotation.left, annotation.right
        else:
            try:
                contour = trace_outer_contour(palm_mask, roi_config.min_component_area)
                hull = convex_hull(contour)
                candidates = detect_valley_points(contour, hull, roi_config.defect_depth_fraction)
                left, right = select_valley_pair(candidates)
            except (SegmentationError, DegenerateGeometryError, ValleyDetectionError) as exc:
                self._logger.warning("valley_detection_failed", source_id=source_id, error=str(exc))
                raise
            self._logger.debug(
                "valleys_detected",
                source_id=source_id,
                candidates=len(candidates),
                left=left,
                right=right,
            )

        roi, roi_mask, geometry = extract_roi(img, palm_mask, left, right, roi_config.anchor)
        if roi_config.erosion_order is ErosionOrder.BEFORE_RESIZE:
            roi_mask = resize_mask(erode(roi_mask, roi_config.erosion_radius), roi_config.resize_factor)
        else:
            roi_mask = erode(resize_mask(roi_mask, roi_config.resize_factor), roi_config.erosion_radius)
        roi = resize_bilinear(roi, roi_config.resize_factor)
        enhanced = self._enhancer.enhance(roi)
        features = self._sift.extract(enhanced, mask=roi_mask, source_id=source_id)

        self._logger.info(
            "features_extracted",
            source_id=source_id,
            annotated=annotation is not None,
            roi_side=geometry.side,
            keypoints=len(features),
        )
        return ExtractionResult(
            source_id=source_id,
            features=features,
            palm_mask=palm_mask,
            roi=roi,
            roi_mask=roi_mask,
            enhanced=enhanced,
            geometry=geometry,
            annotated=annotation is not None,
        )

    def extract_path(self, image_path: Path, source_id: str | None = None) -> ExtractionResult:
        """Extract from an image file, honouring a ``.valleys.json`` sidecar when present.

        Args:
            image_path: Grayscale or color image; color channels are averaged.
            source_id: Identifier stamped on the FeatureSet; defaults to the file stem.

        Returns:
            The ExtractionResult with the features and every intermediate raster.

        Raises:
            ImageReadError: The file is missing or cannot be decoded.
            GeometryError: The sidecar exists but is malformed.
        """
        source_id = source_id or image_path.stem
        self._logger.debug("extraction_started", source_id=source_id, path=str(image_path))
        return self.extract_image(read_image(image_path), source_id, load_sidecar(image_path))

    async def extract_path_async(self, image_path: Path, source_id: str | None = None) -> ExtractionResult:
        return await asyncio.to_thread(self.extract_path, image_path, source_id)


def write_debug_images(result: ExtractionResult, debug_dir: Path) -> list[Path]:
    """Write the palm matte, the ROI, its eroded mask and the enhanced ROI as PNGs."""
    stem = result.source_id
    paths = {
        "mask": debug_dir / f"{stem}_mask.png",
        "roi": debug_dir / f"{stem}_roi.png",
        "roi_mask": debug_dir / f"{stem}_roi_mask.png",
        "enhanced": debug_dir / f"{stem}_enhanced.png",
    }
    write_mask(paths["mask"], result.palm_mask)
    write_image(paths["roi"], result.roi)
    write_mask(paths["roi_mask"], result.roi_mask)
    write_image(paths["enhanced"], result.enhanced)
    return list(paths.values())
