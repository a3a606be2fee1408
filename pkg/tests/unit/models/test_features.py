"""Unit tests for keypoint, feature set and match set models."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from veinmatch.models.features import DESCRIPTOR_LENGTH, FeatureSet, Keypoint, SiftParams
from veinmatch.models.matches import MatchPair, MatchSet


def _make_descriptors(count: int, seed: int = 0) -> np.ndarray:
    """Random unit-length descriptor rows."""
    rng = np.random.default_rng(seed)
    raw = rng.random((count, DESCRIPTOR_LENGTH))
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def _make_features(count: int = 3, source_id: str = "probe") -> FeatureSet:
    keypoints = [Keypoint(x=float(i), y=float(2 * i), scale=1.6) for i in range(count)]
    return FeatureSet(source_id=source_id, keypoints=keypoints, descriptors=_make_descriptors(count))


class TestKeypoint:
    """Tests for Keypoint validation."""

    def test_orientation_must_lie_in_half_open_range(self) -> None:
        Keypoint(x=0.0, y=0.0, scale=1.0, orientation=-math.pi)

        with pytest.raises(ValidationError):
            Keypoint(x=0.0, y=0.0, scale=1.0, orientation=math.pi)

    def test_scale_must_be_positive(self) -> None:
        with pytest.raises(ValidationError):
            Keypoint(x=0.0, y=0.0, scale=0.0)

    def test_coordinates_must_be_finite(self) -> None:
        with pytest.raises(ValidationError):
            Keypoint(x=float("nan"), y=0.0, scale=1.0)


class TestFeatureSet:
    """Tests for FeatureSet invariants and serialization."""

    def test_accepts_unit_and_zero_descriptors(self) -> None:
        descriptors = _make_descriptors(2)
        descriptors[1] = 0.0
        keypoints = [Keypoint(x=1.0, y=1.0, scale=2.0), Keypoint(x=5.0, y=5.0, scale=2.0)]

        features = FeatureSet(source_id="a", keypoints=keypoints, descriptors=descriptors)

        assert len(features) == 2

    def test_rejects_non_unit_descriptor(self) -> None:
        descriptors = _make_descriptors(1) * 2.0

        with pytest.raises(ValidationError):
            FeatureSet(source_id="a", keypoints=[Keypoint(x=0.0, y=0.0, scale=1.0)], descriptors=descriptors)

    def test_rejects_wrong_descriptor_width(self) -> None:
        with pytest.raises(ValidationError):
            FeatureSet(source_id="a", keypoints=[], descriptors=np.zeros((0, 64)))

    def test_rejects_mismatched_lengths(self) -> None:
        with pytest.raises(ValidationError):
            FeatureSet(source_id="a", keypoints=[Keypoint(x=0.0, y=0.0, scale=1.0)], descriptors=_make_descriptors(2))

    def test_descriptors_are_read_only(self) -> None:
        features = _make_features()

        with pytest.raises(ValueError):
            features.descriptors[0, 0] = 1.0

    def test_empty_set_has_no_coordinates(self) -> None:
        features = FeatureSet(source_id="empty")

        assert len(features) == 0
        assert features.coordinates().shape == (0, 2)

    def test_coordinates_follow_keypoint_order(self) -> None:
        features = _make_features(3)

        np.testing.assert_array_equal(features.coordinates(), [[0.0, 0.0], [1.0, 2.0], [2.0, 4.0]])

    def test_record_round_trip_preserves_content(self) -> None:
        features = _make_features(4)

        restored = FeatureSet.from_record(features.to_record())

        assert restored.source_id == features.source_id
        assert restored.keypoints == features.keypoints
        np.testing.assert_array_equal(restored.descriptors, features.descriptors)


class TestSiftParams:
    """Tests for SiftParams defaults and validation."""

    def test_defaults_follow_published_values(self) -> None:
        params = SiftParams()

        assert params.scales_per_octave == 3
        assert params.sigma0 == 1.6
        assert params.contrast_threshold == 0.03
        assert params.edge_ratio == 10.0

    def test_assumed_blur_must_stay_below_sigma0(self) -> None:
        with pytest.raises(ValidationError):
            SiftParams(sigma0=1.0, assumed_blur=1.0)


class TestMatchSet:
    """Tests for MatchSet invariants."""

    def test_rejects_repeated_query_index(self) -> None:
        pairs = [
            MatchPair(query_idx=0, gallery_idx=0, distance=0.1),
            MatchPair(query_idx=0, gallery_idx=1, distance=0.2),
        ]

        with pytest.raises(ValidationError):
            MatchSet(query_id="p", gallery_id="g", pairs=pairs)

    def test_gallery_index_may_repeat(self) -> None:
        pairs = [
            MatchPair(query_idx=0, gallery_idx=1, distance=0.1),
            MatchPair(query_idx=1, gallery_idx=1, distance=0.2),
        ]

        matches = MatchSet(query_id="p", gallery_id="g", pairs=pairs)

        assert len(matches) == 2

    def test_validate_against_detects_out_of_range_pair(self) -> None:
        matches = MatchSet(query_id="p", gallery_id="g", pairs=[MatchPair(query_idx=3, gallery_idx=0, distance=0.0)])

        with pytest.raises(ValueError):
            matches.validate_against(query_size=3, gallery_size=5)

    def test_with_pairs_keeps_ids(self) -> None:
        matches = MatchSet(query_id="p", gallery_id="g")

        replaced = matches.with_pairs([MatchPair(query_idx=0, gallery_idx=0, distance=0.5)])

        assert (replaced.query_id, replaced.gallery_id) == ("p", "g")
        assert len(replaced) == 1
        assert replaced.schema_version == MatchSet.SCHEMA_VERSION
