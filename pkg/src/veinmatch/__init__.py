"""veinmatch - SIFT-based palm-vein feature matching with geometric match filtering."""

from importlib.metadata import version, PackageNotFoundError

try:
    __version__ = version("veinmatch")
except PackageNotFoundError:
    __version__ = "unknown"

__all__ = ["__version__"]
