from enum import StrEnum


class Hand(StrEnum):
    LEFT = "left"
    RIGHT = "right"

    @classmethod
    def parse(cls, value: str) -> "Hand":
        normalized = value.strip().lower()
        if normalized in ("l", "left"):
            return cls.LEFT
        if normalized in ("r", "right"):
            return cls.RIGHT
        raise ValueError(f"unknown hand '{value}'")


class MatcherKind(StrEnum):
    ED = "ed"
    KNN_RT = "knn_rt"
    BIDIRECTIONAL = "bidirectional"


class FilterKind(StrEnum):
    NONE = "none"
    MMD = "mmd"
    RANSAC = "ransac"


class RoiAnchor(StrEnum):
    TOP = "top"
    CENTER = "center"


class ErosionOrder(StrEnum):
    BEFORE_RESIZE = "before_resize"
    AFTER_RESIZE = "after_resize"


class ScoreAggregation(StrEnum):
    MAX = "max"
    SUM = "sum"
    MEAN = "mean"


class SweepKind(StrEnum):
    THRESHOLD = "threshold"
    ROTATION = "rotation"
    RATIO = "ratio"
