"""Contrast enhancers applied to the ROI before feature extraction."""

from typing import Protocol, runtime_checkable

from veinmatch.models.config import EnhancementConfig
from veinmatch.models.image import GrayImage
from veinmatch.vision.imagecore import tile_contrast_enhance


@runtime_checkable
class Enhancer(Protocol):
    name: str

    def enhance(self, img: GrayImage) -> GrayImage: ...


class TileStretchEnhancer:
    """Default enhancer: per-tile clip-limited stretch with bilinear blending."""

    name = "tile_stretch"

    def __init__(self, tile_size: int = 16, clip_fraction: float = 0.98) -> None:
        self.tile_size = tile_size
        self.clip_fraction = clip_fraction

    def enhance(self, img: GrayImage) -> GrayImage:
        return tile_contrast_enhance(img, tile_size=self.tile_size, clip_fraction=self.clip_fraction)


class IdentityEnhancer:
    name = "identity"

    def enhance(self, img: GrayImage) -> GrayImage:
        return img


def create_enhancer(config: EnhancementConfig) -> Enhancer:
    if not config.enabled:
        return IdentityEnhancer()
    return TileStretchEnhancer(tile_size=config.tile_size, clip_fraction=config.clip_fraction)
