"""Brute-force descriptor matching: closest ED, KNN ratio test, mutual nearest neighbours.

Ties resolve to the lowest gallery index.
"""

import numpy as np
from scipy.spatial.distance import cdist

from veinmatch.errors import ConfigError, ParameterError
from veinmatch.models.config import MatcherConfig
from veinmatch.models.enums import MatcherKind
from veinmatch.models.features import FeatureSet
from veinmatch.models.matches import MatchPair, MatchSet
from veinmatch.vision.sift import root_sift_features


def distance_matrix(query: FeatureSet, gallery: FeatureSet) -> np.ndarray:
    """Euclidean distances, shape (len(query), len(gallery))."""
    return cdist(query.descriptors, gallery.descriptors, metric="euclidean")


def _empty(query: FeatureSet, gallery: FeatureSet) -> MatchSet:
    return MatchSet(query_id=query.source_id, gallery_id=gallery.source_id)


def _build(
    query: FeatureSet,
    gallery: FeatureSet,
    query_indices: np.ndarray,
    gallery_indices: np.ndarray,
    distances: np.ndarray,
) -> MatchSet:
    pairs = [
        MatchPair(query_idx=int(q), gallery_idx=int(g), distance=float(d))
        for q, g, d in zip(query_indices, gallery_indices, distances)
    ]
    return MatchSet(query_id=query.source_id, gallery_id=gallery.source_id, pairs=pairs)


def _within(distances: np.ndarray, max_distance: float | None) -> np.ndarray:
    if max_distance is None:
        return np.ones(distances.shape, dtype=bool)
    if max_distance < 0:
        raise ParameterError(f"max_distance must be non-negative, got {max_distance}")
    return distances <= max_distance


def match_closest_ed(query: FeatureSet, gallery: FeatureSet, max_distance: float | None = None) -> MatchSet:
    if len(query) == 0 or len(gallery) == 0:
        return _empty(query, gallery)
    distances = distance_matrix(query, gallery)
    rows = np.arange(len(query))
    nearest = np.argmin(distances, axis=1)
    best = distances[rows, nearest]
    keep = _within(best, max_distance)
    return _build(query, gallery, rows[keep], nearest[keep], best[keep])


def match_knn_ratio(query: FeatureSet, gallery: FeatureSet, ratio: float = 0.7) -> MatchSet:
    """Keep a nearest neighbour iff d1 < ratio * d2."""
    if not (0.0 < ratio < 1.0):
        raise ParameterError(f"ratio must lie in (0, 1), got {ratio}")
    if len(gallery) < 2:
        raise ParameterError(f"ratio test needs at least 2 gallery keypoints, got {len(gallery)}")
    if len(query) == 0:
        return _empty(query, gallery)
    distances = distance_matrix(query, gallery)
    rows = np.arange(len(query))
    order = np.argsort(distances, axis=1, kind="stable")
    nearest, second = order[:, 0], order[:, 1]
    d1, d2 = distances[rows, nearest], distances[rows, second]
    keep = d1 < ratio * d2
    return _build(query, gallery, rows[keep], nearest[keep], d1[keep])


def match_bidirectional(query: FeatureSet, gallery: FeatureSet, max_distance: float | None = None) -> MatchSet:
    """Mutual nearest neighbours under the closest-ED rule."""
    if len(query) == 0 or len(gallery) == 0:
        return _empty(query, gallery)
    distances = distance_matrix(query, gallery)
    rows = np.arange(len(query))
    forward = np.argmin(distances, axis=1)
    backward = np.argmin(distances, axis=0)
    best = distances[rows, forward]
    keep = (backward[forward] == rows) & _within(best, max_distance)
    return _build(query, gallery, rows[keep], forward[keep], best[keep])


def match_features(query: FeatureSet, gallery: FeatureSet, config: MatcherConfig) -> MatchSet:
    """Dispatch to the configured matcher, applying RootSIFT first when enabled."""
    if config.root_sift:
        query, gallery = root_sift_features(query), root_sift_features(gallery)
    match config.kind:
        case MatcherKind.ED:
            return match_closest_ed(query, gallery, config.max_distance)
        case MatcherKind.KNN_RT:
            if len(gallery) < 2:
                return _empty(query, gallery)
            return match_knn_ratio(query, gallery, config.ratio)
        case MatcherKind.BIDIRECTIONAL:
            return match_bidirectional(query, gallery, config.max_distance)
    raise ConfigError(f"unknown matcher kind: {config.kind}")
