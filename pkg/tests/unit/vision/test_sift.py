"""Unit tests for the scale space, keypoint detection, descriptors and RootSIFT."""

import math

import numpy as np
import pytest

from veinmatch.bench.images import gaussian_blob, texture_fixture, texture_pair
from veinmatch.errors import ParameterError
from veinmatch.models.features import DESCRIPTOR_LENGTH, FeatureSet, Keypoint, SiftParams
from veinmatch.models.image import BinaryMask, GrayImage
from veinmatch.vision.imagecore import rotate_about, rotate_point
from veinmatch.vision.sift import (
    ORIENTATION_BINS,
    SiftExtractor,
    build_dog_scale_space,
    describe_keypoints,
    detect_keypoints,
    dominant_orientations,
    keypoint_array,
    orientation_histogram,
    passes_edge_test,
    root_sift,
    root_sift_features,
)


def _make_step_edge(size: int = 64) -> GrayImage:
    pixels = np.zeros((size, size))
    pixels[:, size // 2 :] = 1.0
    return GrayImage.from_array(pixels)


def _make_ramp(size: int = 32, axis: int = 1) -> np.ndarray:
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    return (cols if axis == 1 else rows) / size


def _peaked_histogram(peaks: dict[int, float]) -> np.ndarray:
    histogram = np.full(ORIENTATION_BINS, 0.05)
    for index, height in peaks.items():
        histogram[index] = height
        histogram[(index - 1) % ORIENTATION_BINS] = 0.5 * height
        histogram[(index + 1) % ORIENTATION_BINS] = 0.5 * height
    return histogram


class TestBuildDogScaleSpace:
    """Tests for the Gaussian and difference-of-Gaussian pyramid."""

    def test_octave_sizes_halve_until_minimum(self) -> None:
        space = build_dog_scale_space(texture_fixture(size=64))

        assert [octave.shape for octave in space.octaves] == [(64, 64), (32, 32), (16, 16)]
        assert [octave.index for octave in space.octaves] == [0, 1, 2]

    def test_layer_counts(self) -> None:
        params = SiftParams(scales_per_octave=4)

        space = build_dog_scale_space(texture_fixture(size=64), params)

        for octave in space.octaves:
            assert len(octave.gaussians) == 7
            assert len(octave.dogs) == 6

    def test_dog_is_difference_of_adjacent_gaussians(self) -> None:
        space = build_dog_scale_space(texture_fixture(size=64, seed=2))

        for octave in space.octaves:
            for index, dog in enumerate(octave.dogs):
                np.testing.assert_array_equal(dog, octave.gaussians[index + 1] - octave.gaussians[index])

    def test_next_octave_starts_from_twice_base_blur(self) -> None:
        params = SiftParams()
        space = build_dog_scale_space(texture_fixture(size=64, seed=3), params)

        first, second = space.octaves[0], space.octaves[1]

        np.testing.assert_array_equal(second.gaussians[0], first.gaussians[params.scales_per_octave][::2, ::2])

    def test_constant_image_has_zero_dogs(self) -> None:
        space = build_dog_scale_space(GrayImage.constant(48, 48, 0.4))

        for octave in space.octaves:
            for dog in octave.dogs:
                np.testing.assert_allclose(dog, 0.0, atol=1e-12)

    def test_octave_limit(self) -> None:
        space = build_dog_scale_space(texture_fixture(size=128), SiftParams(n_octaves=2))

        assert len(space.octaves) == 2

    def test_doubled_input_adds_octave(self) -> None:
        space = build_dog_scale_space(texture_fixture(size=32), SiftParams(double_input=True))

        assert space.octaves[0].index == -1
        assert space.octaves[0].shape == (64, 64)
        assert space.octaves[0].step == 0.5

    def test_small_image_fails(self) -> None:
        with pytest.raises(ParameterError):
            build_dog_scale_space(GrayImage.constant(15, 15, 0.5))


class TestDetectKeypoints:
    """Tests for extremum detection, localization and rejection."""

    def test_constant_image_has_no_keypoints(self) -> None:
        space = build_dog_scale_space(GrayImage.constant(64, 64, 0.5))

        assert detect_keypoints(space) == []

    def test_blob_center_and_scale(self) -> None:
        blob_sigma = 2.9
        space = build_dog_scale_space(gaussian_blob(size=64, sigma=blob_sigma, center=(32.0, 32.0)))

        keypoints = detect_keypoints(space)

        near = [kp for kp in keypoints if math.hypot(kp.x - 32.0, kp.y - 32.0) <= 2.0]
        assert near
        assert any(blob_sigma / 1.5 <= kp.scale <= blob_sigma * 1.5 for kp in near)

    def test_step_edge_is_rejected(self) -> None:
        space = build_dog_scale_space(_make_step_edge())

        assert detect_keypoints(space) == []

    def test_keypoints_pass_contrast_threshold(self) -> None:
        params = SiftParams()
        space = build_dog_scale_space(texture_fixture(size=96, seed=4), params)

        keypoints = detect_keypoints(space, params)

        assert keypoints
        assert all(kp.response >= params.contrast_threshold for kp in keypoints)
        assert all(0 <= kp.x < 96 and 0 <= kp.y < 96 for kp in keypoints)

    def test_higher_contrast_threshold_keeps_fewer(self) -> None:
        img = texture_fixture(size=96, seed=4)

        loose = detect_keypoints(build_dog_scale_space(img, SiftParams(contrast_threshold=0.01)))
        strict = detect_keypoints(build_dog_scale_space(img, SiftParams(contrast_threshold=0.08)))

        assert len(strict) < len(loose)

    @pytest.mark.slow
    def test_translation_moves_keypoints(self) -> None:
        dx, dy, size, margin = 8, 4, 160, 40
        first, second = texture_pair(size=size, shift=(dx, dy), seed=3)
        params = SiftParams(n_octaves=2)

        before = detect_keypoints(build_dog_scale_space(first, params), params)
        after = keypoint_array(detect_keypoints(build_dog_scale_space(second, params), params))

        interior = [
            kp for kp in before if margin <= kp.x <= size - margin - dx and margin <= kp.y <= size - margin - dy
        ]
        assert len(interior) >= 20
        found = 0
        for kp in interior:
            offsets = np.abs(after[:, :2] - np.array([kp.x + dx, kp.y + dy]))
            if np.any(np.all(offsets <= 0.5, axis=1)):
                found += 1
        assert found >= 0.95 * len(interior)


class TestPassesEdgeTest:
    """Tests for the principal-curvature ratio test."""

    def test_isotropic_passes(self) -> None:
        assert passes_edge_test(np.diag([1.0, 1.0]), 10.0)

    def test_elongated_fails(self) -> None:
        assert not passes_edge_test(np.diag([1.0, 0.01]), 10.0)

    def test_saddle_fails(self) -> None:
        assert not passes_edge_test(np.diag([1.0, -1.0]), 10.0)

    def test_ratio_boundary(self) -> None:
        # curvature ratio 5 gives trace^2 / det = 7.2, below 12.1
        assert passes_edge_test(np.diag([5.0, 1.0]), 10.0)
        assert not passes_edge_test(np.diag([5.0, 1.0]), 4.0)


class TestOrientations:
    """Tests for the orientation histogram and its peaks."""

    def test_single_peak(self) -> None:
        angles = dominant_orientations(_peaked_histogram({9: 1.0}))

        assert angles == [pytest.approx(math.pi / 2)]

    def test_two_peaks_within_ratio(self) -> None:
        angles = dominant_orientations(_peaked_histogram({3: 1.0, 20: 0.9}))

        assert len(angles) == 2

    def test_weak_peak_is_dropped(self) -> None:
        angles = dominant_orientations(_peaked_histogram({3: 1.0, 20: 0.5}))

        assert len(angles) == 1

    def test_half_turn_wraps_to_minus_pi(self) -> None:
        angles = dominant_orientations(_peaked_histogram({18: 1.0}))

        assert len(angles) == 1
        assert -math.pi <= angles[0] < math.pi
        assert abs(angles[0]) == pytest.approx(math.pi)

    def test_empty_histogram(self) -> None:
        assert dominant_orientations(np.zeros(ORIENTATION_BINS)) == []

    def test_horizontal_ramp_points_along_x(self) -> None:
        histogram = orientation_histogram(_make_ramp(axis=1), 16.0, 16.0, 2.0)

        assert dominant_orientations(histogram) == [pytest.approx(0.0, abs=1e-9)]

    def test_vertical_ramp_points_down(self) -> None:
        histogram = orientation_histogram(_make_ramp(axis=0), 16.0, 16.0, 2.0)

        assert dominant_orientations(histogram) == [pytest.approx(math.pi / 2)]


class TestDescribeKeypoints:
    """Tests for oriented descriptors."""

    def test_descriptors_are_unit_length(self) -> None:
        features = SiftExtractor().extract(texture_fixture(size=96, seed=6), source_id="tex")

        assert len(features) > 0
        assert features.descriptors.shape == (len(features), DESCRIPTOR_LENGTH)
        norms = np.linalg.norm(features.descriptors, axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-5)
        assert features.source_id == "tex"

    def test_orientations_in_range(self) -> None:
        features = SiftExtractor().extract(texture_fixture(size=96, seed=6))

        assert all(-math.pi <= kp.orientation < math.pi for kp in features.keypoints)

    def test_descriptor_distances_are_bounded(self) -> None:
        descriptors = SiftExtractor().extract(texture_fixture(size=96, seed=7)).descriptors

        distances = np.linalg.norm(descriptors[:, None, :] - descriptors[None, :, :], axis=2)

        assert distances.max() <= 2.0 + 1e-9

    def test_affine_intensity_change(self) -> None:
        img = texture_fixture(size=96, seed=8)
        dimmed = GrayImage.from_array(0.5 * img.pixels + 0.25)
        params = SiftParams()
        space = build_dog_scale_space(img, params)
        keypoints = detect_keypoints(space, params)

        original = describe_keypoints(space, keypoints, params=params)
        changed = describe_keypoints(build_dog_scale_space(dimmed, params), keypoints, params=params)

        assert len(original) == len(changed) > 0
        np.testing.assert_allclose(changed.descriptors, original.descriptors, atol=1e-3)

    def test_mask_filtering_drops_outside_keypoints(self) -> None:
        img = texture_fixture(size=96, seed=9)
        bits = np.zeros((96, 96), dtype=bool)
        bits[:, :48] = True
        mask = BinaryMask(bits=bits)

        filtered = SiftExtractor(SiftParams(mask_filtering=True)).extract(img, mask)
        unfiltered = SiftExtractor(SiftParams(mask_filtering=False)).extract(img, mask)

        assert all(mask.contains(kp.x, kp.y) for kp in filtered.keypoints)
        assert len(filtered) < len(unfiltered)

    def test_mask_shape_mismatch_fails(self) -> None:
        space = build_dog_scale_space(texture_fixture(size=64))

        with pytest.raises(ParameterError):
            describe_keypoints(space, [], mask=BinaryMask.full(32, 32))

    def test_extraction_is_deterministic(self) -> None:
        img = texture_fixture(size=96, seed=10)

        first = SiftExtractor().extract(img)
        second = SiftExtractor().extract(img)

        assert first.keypoints == second.keypoints
        np.testing.assert_array_equal(first.descriptors, second.descriptors)

    @pytest.mark.slow
    def test_rotation_invariance(self) -> None:
        size, angle = 160, math.radians(30.0)
        center = ((size - 1) / 2.0, (size - 1) / 2.0)
        img = texture_fixture(size=size, seed=5, sigma=3.0)
        extractor = SiftExtractor()

        original = extractor.extract(img)
        rotated = extractor.extract(rotate_about(img, angle, center))

        positions = rotated.coordinates()
        scales = np.array([kp.scale for kp in rotated.keypoints])
        distances = []
        for index, kp in enumerate(original.keypoints):
            if math.hypot(kp.x - center[0], kp.y - center[1]) > 45.0:
                continue
            expected = np.array(rotate_point((kp.x, kp.y), angle, center))
            close = (np.linalg.norm(positions - expected, axis=1) <= 1.0) & (np.abs(np.log(scales / kp.scale)) < 0.25)
            if not np.any(close):
                continue
            gaps = np.linalg.norm(rotated.descriptors[close] - original.descriptors[index], axis=1)
            distances.append(gaps.min())
        assert len(distances) >= 10
        assert np.mean(np.array(distances) < 0.6) >= 0.5


class TestRootSift:
    """Tests for the RootSIFT transform."""

    def test_one_hot_is_fixed(self) -> None:
        vector = np.zeros(DESCRIPTOR_LENGTH)
        vector[7] = 1.0

        np.testing.assert_array_equal(root_sift(vector), vector)

    def test_uniform_is_fixed(self) -> None:
        vector = np.full(DESCRIPTOR_LENGTH, 1.0 / math.sqrt(DESCRIPTOR_LENGTH))

        np.testing.assert_allclose(root_sift(vector), vector)

    def test_two_component_arithmetic(self) -> None:
        vector = np.zeros(DESCRIPTOR_LENGTH)
        vector[:2] = (0.8, 0.6)

        result = root_sift(vector)

        assert result[0] == pytest.approx(0.7559, abs=1e-4)
        assert result[1] == pytest.approx(0.6547, abs=1e-4)
        assert np.linalg.norm(result) == pytest.approx(1.0)

    def test_zero_descriptor_is_unchanged(self) -> None:
        np.testing.assert_array_equal(root_sift(np.zeros(DESCRIPTOR_LENGTH)), np.zeros(DESCRIPTOR_LENGTH))

    def test_feature_set_rows_match_single_transform(self) -> None:
        rng = np.random.default_rng(11)
        descriptors = np.abs(rng.normal(size=(5, DESCRIPTOR_LENGTH)))
        descriptors /= np.linalg.norm(descriptors, axis=1, keepdims=True)
        descriptors[2] = 0.0
        keypoints = [Keypoint(x=float(i), y=float(i), scale=1.6) for i in range(5)]
        features = FeatureSet(source_id="s", keypoints=keypoints, descriptors=descriptors)

        transformed = root_sift_features(features)

        for row, original in zip(transformed.descriptors, features.descriptors):
            np.testing.assert_allclose(row, root_sift(original))
        assert transformed.keypoints == features.keypoints
