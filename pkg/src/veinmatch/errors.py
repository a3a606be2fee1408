"""Exception hierarchy shared by every veinmatch layer.

The CLI maps any VeinMatchError to exit status 1.
"""


class VeinMatchError(Exception):
    """Base class for all domain errors."""


class ParameterError(VeinMatchError, ValueError):
    """An operation received an argument outside its documented range."""


class DegenerateHistogramError(VeinMatchError, ValueError):
    """Thresholding needs at least two distinct intensity levels."""


class SegmentationError(VeinMatchError):
    """No sufficiently large foreground component was found."""


class DegenerateGeometryError(VeinMatchError, ValueError):
    """Point set is collinear or too small for the requested construction."""


class ValleyDetectionError(VeinMatchError):
    """Fewer than two inter-finger valley candidates were found."""


class GeometryError(VeinMatchError, ValueError):
    """ROI geometry violates its preconditions."""


class EmptyInputError(VeinMatchError, ValueError):
    """An operation that needs at least one element received none."""


class EnrollmentError(VeinMatchError):
    """Not enough samples to build a template and keep a probe."""


class ProtocolError(VeinMatchError):
    """The dataset cannot support the requested evaluation protocol."""


class EvaluationError(VeinMatchError):
    """Score records cannot produce an error-rate estimate."""


class ConfigError(VeinMatchError):
    """Configuration references an unknown variant or an invalid value."""


class ConsistencyError(VeinMatchError):
    """Two artifacts that must describe the same data disagree."""


class FeatureFormatError(VeinMatchError):
    """A feature file is truncated, has the wrong magic or an unknown version."""


class ImageReadError(VeinMatchError, OSError):
    """An image file could not be decoded."""
