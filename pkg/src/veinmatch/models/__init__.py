from veinmatch.models.config import (
    EnhancementConfig,
    FilterConfig,
    MatcherConfig,
    PipelineConfig,
    ProtocolConfig,
    RoiConfig,
)
from veinmatch.models.enums import (
    ErosionOrder,
    FilterKind,
    Hand,
    MatcherKind,
    RoiAnchor,
    ScoreAggregation,
    SweepKind,
)
from veinmatch.models.evaluation import (
    CurvePoint,
    DatasetManifest,
    EerResult,
    Enrollment,
    Identity,
    ManifestEntry,
    Sample,
    ScoreRecord,
    Template,
)
from veinmatch.models.features import FeatureSet, Keypoint, SiftParams
from veinmatch.models.filtering import (
    FilterOutcome,
    MmdDecision,
    MmdParams,
    MmdStats,
    RansacParams,
    RansacResult,
    SimilarityTransform,
)
from veinmatch.models.geometry import Contour, RoiGeometry, ValleyAnnotation, ValleyCandidate
from veinmatch.models.image import BinaryMask, GradientField, GrayImage
from veinmatch.models.matches import MatchPair, MatchSet
from veinmatch.models.report import EvaluationReport, EvaluationRow
from veinmatch.models.synthetic import (
    FilterMetrics,
    HandPose,
    PalmPattern,
    RatioSweepRow,
    SceneSpec,
    SweepRow,
    SyntheticScene,
)

__all__ = [
    "BinaryMask",
    "Contour",
    "CurvePoint",
    "DatasetManifest",
    "EerResult",
    "EnhancementConfig",
    "Enrollment",
    "EvaluationReport",
    "EvaluationRow",
    "ErosionOrder",
    "FeatureSet",
    "FilterConfig",
    "FilterKind",
    "FilterMetrics",
    "FilterOutcome",
    "GradientField",
    "GrayImage",
    "Hand",
    "HandPose",
    "Identity",
    "Keypoint",
    "ManifestEntry",
    "MatchPair",
    "MatchSet",
    "MatcherConfig",
    "MatcherKind",
    "MmdDecision",
    "MmdParams",
    "MmdStats",
    "PalmPattern",
    "PipelineConfig",
    "ProtocolConfig",
    "RansacParams",
    "RansacResult",
    "RatioSweepRow",
    "RoiAnchor",
    "RoiConfig",
    "RoiGeometry",
    "Sample",
    "SceneSpec",
    "ScoreAggregation",
    "ScoreRecord",
    "SiftParams",
    "SimilarityTransform",
    "SweepKind",
    "SweepRow",
    "SyntheticScene",
    "Template",
    "ValleyAnnotation",
    "ValleyCandidate",
]
