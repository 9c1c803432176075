"""Distance metrics, relevance, and value rules.

Expected values are frozen from hand computation (special angles, known
norms) and cross-checked against a naive normalize-then-acos reference
implemented independently here.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from volfied.model import (
    Ad,
    DistanceMetric,
    PoA,
    VehicleProfile,
    ad_value,
    distance,
    distances_to,
    is_relevant,
    pairwise_distances,
)

EUCL = DistanceMetric.EUCLIDEAN
ANG = DistanceMetric.ANGULAR


def naive_angular(f1, f2):
    """Reference: normalize first, then acos of the clamped dot product."""
    u1 = np.asarray(f1, float) / np.linalg.norm(f1)
    u2 = np.asarray(f2, float) / np.linalg.norm(f2)
    return math.acos(max(-1.0, min(1.0, float(np.dot(u1, u2)))))


class TestDistance:
    def test_euclidean_known_values(self):
        assert distance(EUCL, np.array([0.3, 0.4]), np.array([0.0, 0.0])) == 0.5
        assert distance(EUCL, np.array([1.0, 1.0]), np.array([0.0, 0.0])) == pytest.approx(
            1.4142135623730951, abs=0
        )

    def test_angular_right_angle(self):
        # arccos(0) = pi/2
        d = distance(ANG, np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        assert d == pytest.approx(1.5707963267948966, abs=1e-15)

    def test_angular_45_degrees(self):
        d = distance(ANG, np.array([1.0, 0.0]), np.array([1.0, 1.0]))
        assert d == pytest.approx(0.7853981633974483, abs=1e-12)

    def test_angular_identical_vectors_is_zero(self):
        # The uncorrected 1 - cos_sim form would give pi/2 here.
        f = np.array([0.5, 0.5])
        assert distance(ANG, f, f.copy()) == 0.0

    def test_angular_scale_invariant(self):
        f1 = np.array([0.2, 0.7, 0.1])
        f2 = np.array([0.5, 0.1, 0.9])
        assert distance(ANG, f1, f2) == pytest.approx(distance(ANG, 3.0 * f1, f2), abs=1e-12)

    def test_angular_matches_naive_reference(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            f1 = rng.uniform(0.01, 1.0, size=5)
            f2 = rng.uniform(0.01, 1.0, size=5)
            assert distance(ANG, f1, f2) == pytest.approx(naive_angular(f1, f2), abs=1e-12)

    def test_zero_vector_raises_angular(self):
        with pytest.raises(ValueError):
            distance(ANG, np.zeros(3), np.ones(3))

    def test_dimension_mismatch_raises(self):
        with pytest.raises(ValueError):
            distance(EUCL, np.ones(2), np.ones(3))


class TestMetricAxioms:
    """Symmetry exact, self-distance ~0, triangle inequality at 1e-9."""

    @pytest.mark.parametrize("metric", [EUCL, ANG])
    def test_symmetry_exact(self, metric):
        rng = np.random.default_rng(11)
        for _ in range(500):
            f1 = rng.uniform(0.01, 1.0, size=5)
            f2 = rng.uniform(0.01, 1.0, size=5)
            assert distance(metric, f1, f2) == distance(metric, f2, f1)

    @pytest.mark.parametrize("metric", [EUCL, ANG])
    def test_self_distance(self, metric):
        rng = np.random.default_rng(13)
        for _ in range(500):
            f = rng.uniform(0.01, 1.0, size=5)
            assert distance(metric, f, f) <= 1e-12

    @pytest.mark.parametrize("metric", [EUCL, ANG])
    def test_triangle_inequality_10k_triples(self, metric):
        rng = np.random.default_rng(17)
        a = rng.uniform(0.0, 1.0, size=(10_000, 5)) + 1e-9
        b = rng.uniform(0.0, 1.0, size=(10_000, 5)) + 1e-9
        c = rng.uniform(0.0, 1.0, size=(10_000, 5)) + 1e-9
        violations = 0
        for i in range(10_000):
            dac = distance(metric, a[i], c[i])
            dab = distance(metric, a[i], b[i])
            dbc = distance(metric, b[i], c[i])
            if dac > dab + dbc + 1e-9:
                violations += 1
        assert violations == 0

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_triangle_inequality_property(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 8))
        pts = rng.uniform(0.01, 1.0, size=(3, n))
        for metric in (EUCL, ANG):
            dac = distance(metric, pts[0], pts[2])
            dab = distance(metric, pts[0], pts[1])
            dbc = distance(metric, pts[1], pts[2])
            assert dac <= dab + dbc + 1e-9


class TestBatchConsistency:
    @pytest.mark.parametrize("metric", [EUCL, ANG])
    def test_distances_to_matches_scalar(self, metric):
        rng = np.random.default_rng(19)
        f = rng.uniform(0.01, 1.0, size=5)
        others = rng.uniform(0.01, 1.0, size=(64, 5))
        batch = distances_to(metric, f, others)
        for i in range(64):
            assert batch[i] == pytest.approx(distance(metric, f, others[i]), abs=1e-9)

    @pytest.mark.parametrize("metric", [EUCL, ANG])
    def test_pairwise_matches_scalar(self, metric):
        rng = np.random.default_rng(23)
        a = rng.uniform(0.01, 1.0, size=(12, 4))
        b = rng.uniform(0.01, 1.0, size=(9, 4))
        mat = pairwise_distances(metric, a, b)
        assert mat.shape == (12, 9)
        for i in range(12):
            for j in range(9):
                assert mat[i, j] == pytest.approx(distance(metric, a[i], b[j]), abs=1e-9)


class TestAdValueAndRelevance:
    def test_global_ad_value_everywhere(self):
        ad = Ad(ad_id=1, features=np.array([0.5, 0.5]), base_value=0.8)
        assert ad_value(ad, 0) == 0.8
        assert ad_value(ad, 7) == 0.8
        assert ad_value(ad, None) == 0.8

    def test_local_ad_value_only_at_target(self):
        ad = Ad(ad_id=2, features=np.array([0.5, 0.5]), base_value=0.6, target_poa=3)
        assert ad_value(ad, 3) == 0.6
        assert ad_value(ad, 4) == 0.0
        assert ad_value(ad, None) == 0.0

    def test_relevance_boundary_ties_relevant(self):
        v = VehicleProfile(vehicle_id=0, interests=np.array([0.0, 0.0]))
        at_threshold = Ad(ad_id=1, features=np.array([0.15, 0.0]), base_value=0.5)
        just_outside = Ad(ad_id=2, features=np.array([0.150001, 0.0]), base_value=0.5)
        assert is_relevant(at_threshold, v, 0, 0.15, EUCL)
        assert not is_relevant(just_outside, v, 0, 0.15, EUCL)

    def test_local_ad_irrelevant_off_target(self):
        v = VehicleProfile(vehicle_id=0, interests=np.array([0.5, 0.5]))
        ad = Ad(ad_id=1, features=np.array([0.5, 0.5]), base_value=0.5, target_poa=2)
        assert is_relevant(ad, v, 2, 0.1, EUCL)
        assert not is_relevant(ad, v, 1, 0.1, EUCL)
        assert not is_relevant(ad, v, None, 0.1, EUCL)


class TestValidation:
    def test_nonpositive_base_value_rejected(self):
        with pytest.raises(ValueError):
            Ad(ad_id=1, features=np.array([0.5]), base_value=0.0)

    def test_nonfinite_features_rejected(self):
        with pytest.raises(ValueError):
            Ad(ad_id=1, features=np.array([np.nan, 0.5]), base_value=0.5)
        with pytest.raises(ValueError):
            VehicleProfile(vehicle_id=0, interests=np.array([np.inf]))

    def test_poa_range_positive(self):
        with pytest.raises(ValueError):
            PoA(poa_id=0, x_m=0.0, y_m=0.0, range_m=0.0)
