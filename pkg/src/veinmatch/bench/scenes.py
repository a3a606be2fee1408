"""Seeded synthetic correspondence scenes with known inliers.

Inlier query points are the gallery points under a similarity transform about
the frame center plus Gaussian noise; outliers pair two independent uniform
points. Random draws happen in a fixed order that does not depend on the
transform, so scenes differing only in rotation share their noise.
"""

import math

import numpy as np

from veinmatch.errors import ConsistencyError, ParameterError
from veinmatch.models.filtering import MmdDecision, SimilarityTransform
from veinmatch.models.matches import MatchPair, MatchSet
from veinmatch.models.synthetic import FilterMetrics, SceneSpec, SyntheticScene

MIN_SCALE = 0.5
MAX_SCALE = 2.0


def _validate(spec: SceneSpec) -> None:
    if not (MIN_SCALE <= spec.scale <= MAX_SCALE):
        raise ParameterError(f"scale must lie in [{MIN_SCALE}, {MAX_SCALE}], got {spec.scale}")
    if not math.isfinite(spec.noise_sigma) or spec.noise_sigma < 0:
        raise ParameterError(f"noise_sigma must be non-negative, got {spec.noise_sigma}")
    if not all(math.isfinite(value) for value in (spec.rotation, spec.tx, spec.ty)):
        raise ParameterError("rotation and translation must be finite")
    if spec.inlier_radius is not None and not (0 < spec.inlier_radius <= spec.FRAME_SIZE / 2):
        raise ParameterError(f"inlier_radius must lie in (0, {spec.FRAME_SIZE / 2}], got {spec.inlier_radius}")


def origin_transform(spec: SceneSpec) -> SimilarityTransform:
    """The scene transform rewritten as x' = s R x + t about the origin."""
    a = spec.scale * complex(math.cos(spec.rotation), math.sin(spec.rotation))
    c = complex(*spec.center)
    b = c - a * c + complex(spec.tx, spec.ty)
    return SimilarityTransform(rotation=spec.rotation, scale=spec.scale, tx=b.real, ty=b.imag)


def apply_transform(points: np.ndarray, spec: SceneSpec) -> np.ndarray:
    cx, cy = spec.center
    cos_r, sin_r = math.cos(spec.rotation), math.sin(spec.rotation)
    dx, dy = points[:, 0] - cx, points[:, 1] - cy
    # displacement form keeps the identity transform exact
    shift_x = spec.scale * (cos_r * dx - sin_r * dy) - dx + spec.tx
    shift_y = spec.scale * (sin_r * dx + cos_r * dy) - dy + spec.ty
    return np.column_stack([points[:, 0] + shift_x, points[:, 1] + shift_y])


def _inlier_gallery(rng: np.random.Generator, spec: SceneSpec) -> np.ndarray:
    if spec.inlier_radius is None:
        return rng.uniform(0.0, spec.FRAME_SIZE, size=(spec.n_inliers, 2))
    radius = spec.inlier_radius * np.sqrt(rng.uniform(size=spec.n_inliers))
    angle = rng.uniform(0.0, 2.0 * math.pi, size=spec.n_inliers)
    cx, cy = spec.center
    return np.column_stack([cx + radius * np.cos(angle), cy + radius * np.sin(angle)])


def generate_scene(spec: SceneSpec) -> tuple[SyntheticScene, MatchSet]:
    _validate(spec)
    rng = np.random.default_rng(spec.seed)
    n = spec.n_pairs

    gallery_in = _inlier_gallery(rng, spec)
    noise = rng.normal(0.0, 1.0, size=(spec.n_inliers, 2)) * spec.noise_sigma
    gallery_out = rng.uniform(0.0, spec.FRAME_SIZE, size=(spec.n_outliers, 2))
    query_out = rng.uniform(0.0, spec.FRAME_SIZE, size=(spec.n_outliers, 2))
    descriptor_distances = rng.uniform(0.0, 1.0, size=n)
    query_order = rng.permutation(n)
    gallery_order = rng.permutation(n)
    pair_order = rng.permutation(n)

    query_in = apply_transform(gallery_in, spec) + noise
    gallery_all = np.vstack([gallery_in, gallery_out]) if n else np.zeros((0, 2))
    query_all = np.vstack([query_in, query_out]) if n else np.zeros((0, 2))
    query_position = np.argsort(query_order)
    gallery_position = np.argsort(gallery_order)

    pairs = [
        MatchPair(
            query_idx=int(query_position[k]),
            gallery_idx=int(gallery_position[k]),
            distance=float(descriptor_distances[k]),
        )
        for k in pair_order
    ]
    truth = sorted((int(gallery_position[k]), int(query_position[k])) for k in range(spec.n_inliers))
    scene = SyntheticScene(
        gallery_points=gallery_all[gallery_order],
        query_points=query_all[query_order],
        true_correspondence=truth,
        transform=origin_transform(spec),
        noise_sigma=spec.noise_sigma,
        n_outliers=spec.n_outliers,
        seed=spec.seed,
    )
    matches = MatchSet(query_id=f"scene-{spec.seed}-query", gallery_id=f"scene-{spec.seed}-gallery", pairs=pairs)
    return scene, matches


def match_metrics(survivors: MatchSet, scene: SyntheticScene, image_accepted: bool = True) -> FilterMetrics:
    """Precision and recall of any surviving MatchSet against the scene's truth."""
    n_query, n_gallery = len(scene.query_points), len(scene.gallery_points)
    try:
        survivors.validate_against(n_query, n_gallery)
    except ValueError as exc:
        raise ConsistencyError(str(exc)) from exc
    truth = scene.inlier_pairs()
    count = len(survivors) if image_accepted else 0
    true_count = sum((pair.gallery_idx, pair.query_idx) in truth for pair in survivors.pairs) if count else 0
    defaulted = count == 0
    precision = 1.0 if defaulted else true_count / count
    recall = true_count / scene.n_inliers if scene.n_inliers else 1.0
    return FilterMetrics(
        precision=precision,
        recall=recall,
        survivors=count,
        true_survivors=true_count,
        image_accepted=image_accepted,
        precision_defaulted=defaulted,
    )


def filter_metrics(decision: MmdDecision, scene: SyntheticScene) -> FilterMetrics:
    n_pairs = len(scene.query_points)
    if decision.n_pairs != n_pairs:
        raise ConsistencyError(f"decision covers {decision.n_pairs} pairs but the scene has {n_pairs}")
    survivors = MatchSet(query_id="survivors", gallery_id="survivors", pairs=decision.accepted)
    return match_metrics(survivors, scene, image_accepted=decision.image_accepted)
