"""Geometric post-filters over a MatchSet: mean-and-median distance (MMD) and RANSAC.

Both filters take keypoint coordinates for the query (P) and gallery (G)
sets, either as FeatureSets or as (n, 2) arrays of (x, y).
"""

import cmath
import itertools
import math

import numpy as np

from veinmatch.errors import ConfigError, EmptyInputError
from veinmatch.models.config import FilterConfig
from veinmatch.models.enums import FilterKind
from veinmatch.models.features import FeatureSet
from veinmatch.models.filtering import (
    FilterOutcome,
    MmdDecision,
    MmdParams,
    MmdStats,
    RansacParams,
    RansacResult,
    SimilarityTransform,
)
from veinmatch.models.matches import MatchSet

Points = FeatureSet | np.ndarray


def as_coordinates(points: Points) -> np.ndarray:
    if isinstance(points, FeatureSet):
        return points.coordinates()
    array = np.asarray(points, dtype=np.float64)
    if array.ndim != 2 or array.shape[1] != 2:
        raise ValueError(f"points must have shape (n, 2), got {array.shape}")
    return array


def _paired_coordinates(
    matches: MatchSet,
    query_points: Points,
    gallery_points: Points,
) -> tuple[np.ndarray, np.ndarray]:
    query = as_coordinates(query_points)
    gallery = as_coordinates(gallery_points)
    matches.validate_against(len(query), len(gallery))
    query_idx = np.array([pair.query_idx for pair in matches.pairs], dtype=np.int64)
    gallery_idx = np.array([pair.gallery_idx for pair in matches.pairs], dtype=np.int64)
    return query[query_idx], gallery[gallery_idx]


def lower_median(values: np.ndarray) -> float:
    """Median that is always an observed value: the lower middle for even counts."""
    ordered = np.sort(values)
    return float(ordered[(len(ordered) - 1) // 2])


def mmd_statistics(
    matches: MatchSet,
    query_points: Points,
    gallery_points: Points,
    signed: bool = False,
) -> MmdStats:
    """Per-axis distances D = X_G - X_P (absolute unless ``signed``), means, medians and N_L/N_H."""
    if len(matches) == 0:
        raise EmptyInputError("MMD statistics need at least one matched pair")
    query, gallery = _paired_coordinates(matches, query_points, gallery_points)
    d_x = gallery[:, 0] - query[:, 0]
    d_y = gallery[:, 1] - query[:, 1]
    if not signed:
        d_x, d_y = np.abs(d_x), np.abs(d_y)
    mu_x, mu_y = math.fsum(d_x) / len(d_x), math.fsum(d_y) / len(d_y)
    n_low = int(np.count_nonzero((d_x <= mu_x) & (d_y <= mu_y)))
    n_high = int(np.count_nonzero((d_x > mu_x) & (d_y > mu_y)))
    return MmdStats(
        d_x=d_x.tolist(),
        d_y=d_y.tolist(),
        mu_x=mu_x,
        mu_y=mu_y,
        med_x=lower_median(d_x),
        med_y=lower_median(d_y),
        n_low=n_low,
        n_high=n_high,
        signed=signed,
    )


def mmd_gate(stats: MmdStats, params: MmdParams) -> bool:
    """Image-level acceptance: any one of the three conditions suffices."""
    return (
        stats.n_low >= stats.n_high
        or (stats.mu_x <= params.t_mu and stats.mu_y <= params.t_mu)
        or (stats.med_x <= stats.mu_x and stats.med_y <= stats.mu_y)
    )


def mmd_filter(
    matches: MatchSet,
    query_points: Points,
    gallery_points: Points,
    params: MmdParams | None = None,
) -> MmdDecision:
    """Reject the whole image or keep pairs lying under both the axis means and T_D.

    Pair comparisons are strict unless ``params.inclusive_bounds``. An empty
    MatchSet is a rejected image.
    """
    params = params or MmdParams()
    if len(matches) == 0:
        return MmdDecision(image_accepted=False, n_pairs=0)

    stats = mmd_statistics(matches, query_points, gallery_points, signed=params.signed_distances)
    if not mmd_gate(stats, params):
        return MmdDecision(image_accepted=False, stats=stats, n_pairs=len(matches))

    d_x, d_y = np.array(stats.d_x), np.array(stats.d_y)
    if params.inclusive_bounds:
        keep = (d_x <= stats.mu_x) & (d_x <= params.t_d) & (d_y <= stats.mu_y) & (d_y <= params.t_d)
    else:
        keep = (d_x < stats.mu_x) & (d_x < params.t_d) & (d_y < stats.mu_y) & (d_y < params.t_d)
    accepted = [pair for pair, kept in zip(matches.pairs, keep) if kept]
    return MmdDecision(image_accepted=True, accepted=accepted, stats=stats, n_pairs=len(matches))


def _similarity_from(z1: complex, z2: complex, w1: complex, w2: complex) -> tuple[complex, complex] | None:
    """w = a z + b through two correspondences, or None if degenerate."""
    if z1 == z2 or w1 == w2:
        return None
    a = (w2 - w1) / (z2 - z1)
    return a, w1 - a * z1


def _sample_pairs(n: int, params: RansacParams):
    if math.comb(n, 2) <= params.iterations:
        yield from itertools.combinations(range(n), 2)
        return
    rng = np.random.default_rng(params.seed)
    for _ in range(params.iterations):
        i, j = rng.choice(n, size=2, replace=False)
        yield int(i), int(j)


def ransac_filter(
    matches: MatchSet,
    query_points: Points,
    gallery_points: Points,
    params: RansacParams | None = None,
) -> RansacResult:
    """Largest consensus set under a 4-DOF similarity mapping query onto gallery points.

    Minimal samples are enumerated exhaustively when there are no more of
    them than ``params.iterations``; otherwise they are drawn from a generator
    seeded with ``params.seed``. The first sample reaching the maximum wins.
    """
    params = params or RansacParams()
    if len(matches) < 2:
        return RansacResult(matches=matches, degenerate=True)

    query, gallery = _paired_coordinates(matches, query_points, gallery_points)
    z = query[:, 0] + 1j * query[:, 1]
    w = gallery[:, 0] + 1j * gallery[:, 1]

    best_mask: np.ndarray | None = None
    best_model: tuple[complex, complex] | None = None
    best_count = 0
    for i, j in _sample_pairs(len(matches), params):
        model = _similarity_from(z[i], z[j], w[i], w[j])
        if model is None:
            continue
        a, b = model
        inliers = np.abs(a * z + b - w) <= params.inlier_tolerance
        count = int(np.count_nonzero(inliers))
        if count > best_count:
            best_mask, best_model, best_count = inliers, model, count

    if best_mask is None or best_model is None:
        return RansacResult(matches=matches, degenerate=True)

    a, b = best_model
    transform = SimilarityTransform(rotation=cmath.phase(a), scale=abs(a), tx=b.real, ty=b.imag)
    kept = [pair for pair, inlier in zip(matches.pairs, best_mask) if inlier]
    return RansacResult(matches=matches.with_pairs(kept), degenerate=False, model=transform)


def filter_matches(
    matches: MatchSet,
    query_points: Points,
    gallery_points: Points,
    config: FilterConfig,
) -> FilterOutcome:
    match config.kind:
        case FilterKind.NONE:
            return FilterOutcome(kind=config.kind, survivors=matches)
        case FilterKind.MMD:
            decision = mmd_filter(matches, query_points, gallery_points, config.mmd)
            return FilterOutcome(
                kind=config.kind,
                survivors=matches.with_pairs(decision.accepted),
                image_accepted=decision.image_accepted,
                mmd=decision,
            )
        case FilterKind.RANSAC:
            result = ransac_filter(matches, query_points, gallery_points, config.ransac)
            return FilterOutcome(kind=config.kind, survivors=result.matches, ransac=result)
    raise ConfigError(f"unknown filter kind: {config.kind}")
