"""Core domain types: ads, points of access, vehicle profiles, distances.

Ads and vehicle interest profiles live in the same n-dimensional feature
space. Relevance of an ad to a vehicle is a distance threshold test plus a
scope rule: Global ads are eligible everywhere, Local ads only under their
target PoA.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "DistanceMetric",
    "Ad",
    "PoA",
    "VehicleProfile",
    "as_features",
    "distance",
    "distances_to",
    "pairwise_distances",
    "ad_value",
    "is_relevant",
]

# Features are 1-D float arrays of a common dimension n.
FeatureVector = np.ndarray


class DistanceMetric(Enum):
    EUCLIDEAN = "euclidean"
    ANGULAR = "angular"


def as_features(coords, n: int | None = None) -> FeatureVector:
    """Validate and convert coordinates to a feature vector.

    Raises ValueError on non-finite entries or (when n is given) a
    dimension mismatch.
    """
    f = np.asarray(coords, dtype=float)
    if f.ndim != 1:
        raise ValueError(f"feature vector must be 1-D, got shape {f.shape}")
    if n is not None and f.shape[0] != n:
        raise ValueError(f"expected {n} features, got {f.shape[0]}")
    if not np.all(np.isfinite(f)):
        raise ValueError("feature vector contains non-finite values")
    return f


@dataclass(frozen=True, eq=False)
class Ad:
    """An ad in feature space. target_poa None means Global scope."""

    ad_id: int
    features: FeatureVector  # shape (n,)
    base_value: float
    target_poa: int | None = None

    def __post_init__(self):
        as_features(self.features)
        if not self.base_value > 0:
            raise ValueError(f"ad {self.ad_id}: base_value must be > 0, got {self.base_value}")

    @property
    def is_global(self) -> bool:
        return self.target_poa is None


@dataclass(frozen=True)
class PoA:
    """Point of access (roadside broadcast unit) with a circular range."""

    poa_id: int
    x_m: float
    y_m: float
    range_m: float

    def __post_init__(self):
        if not self.range_m > 0:
            raise ValueError(f"poa {self.poa_id}: range_m must be > 0, got {self.range_m}")


@dataclass(frozen=True, eq=False)
class VehicleProfile:
    """A vehicle's static interest profile in feature space."""

    vehicle_id: int
    interests: FeatureVector  # shape (n,)

    def __post_init__(self):
        as_features(self.interests)


def _check_same_dim(f1: FeatureVector, f2: FeatureVector) -> None:
    if f1.shape != f2.shape:
        raise ValueError(f"dimension mismatch: {f1.shape} vs {f2.shape}")


def distance(metric: DistanceMetric, f1: FeatureVector, f2: FeatureVector) -> float:
    """Distance between two feature vectors under the given metric.

    Euclidean is the 2-norm of the difference. Angular is the angle
    arccos(cos_sim) with the cosine clamped to [-1, 1] for numerical
    safety, so identical vectors are at distance 0. Angular distance is
    undefined for zero vectors and raises ValueError.
    """
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    _check_same_dim(f1, f2)
    if metric is DistanceMetric.EUCLIDEAN:
        return float(np.linalg.norm(f1 - f2))
    n1 = float(np.linalg.norm(f1))
    n2 = float(np.linalg.norm(f2))
    if n1 == 0.0 or n2 == 0.0:
        raise ValueError("angular distance undefined for zero vectors")
    # dot/(n1*n2) can round to just below 1 for equal inputs, and arccos
    # amplifies that to ~1e-8; equal vectors must come out at exactly 0.
    if np.array_equal(f1, f2):
        return 0.0
    cos_sim = float(np.dot(f1, f2)) / (n1 * n2)
    return math.acos(max(-1.0, min(1.0, cos_sim)))


def distances_to(metric: DistanceMetric, f: FeatureVector, others: np.ndarray) -> np.ndarray:
    """Distances from one vector to each row of `others` (shape (m, n))."""
    f = np.asarray(f, dtype=float)
    others = np.asarray(others, dtype=float)
    if others.ndim != 2 or others.shape[1] != f.shape[0]:
        raise ValueError(f"expected rows of dim {f.shape[0]}, got shape {others.shape}")
    if metric is DistanceMetric.EUCLIDEAN:
        return np.linalg.norm(others - f, axis=1)
    nf = float(np.linalg.norm(f))
    norms = np.linalg.norm(others, axis=1)
    if nf == 0.0 or np.any(norms == 0.0):
        raise ValueError("angular distance undefined for zero vectors")
    cos_sim = (others @ f) / (norms * nf)
    return np.arccos(np.clip(cos_sim, -1.0, 1.0))


def pairwise_distances(metric: DistanceMetric, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance matrix between row sets a (p, n) and b (q, n)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"incompatible shapes {a.shape} and {b.shape}")
    if metric is DistanceMetric.EUCLIDEAN:
        # |x - y|^2 = |x|^2 + |y|^2 - 2 x.y, clipped against tiny negatives
        sq = (
            np.sum(a * a, axis=1)[:, None]
            + np.sum(b * b, axis=1)[None, :]
            - 2.0 * (a @ b.T)
        )
        return np.sqrt(np.clip(sq, 0.0, None))
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na == 0.0) or np.any(nb == 0.0):
        raise ValueError("angular distance undefined for zero vectors")
    cos_sim = (a @ b.T) / np.outer(na, nb)
    return np.arccos(np.clip(cos_sim, -1.0, 1.0))


def ad_value(ad: Ad, poa_id: int | None) -> float:
    """Value of broadcasting `ad` at the given PoA.

    Global ads keep their base value everywhere; Local ads are worth their
    base value under the target PoA and 0 elsewhere.
    """
    if ad.is_global or ad.target_poa == poa_id:
        return ad.base_value
    return 0.0


def is_relevant(
    ad: Ad,
    profile: VehicleProfile,
    poa_id: int | None,
    d_max: float,
    metric: DistanceMetric,
) -> bool:
    """True iff the ad is within d_max of the profile (ties relevant) and
    its scope admits the vehicle's current PoA."""
    if not (ad.is_global or ad.target_poa == poa_id):
        return False
    return distance(metric, ad.features, profile.interests) <= d_max
