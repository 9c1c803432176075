"""Per-PoA revenue estimation and the broadcast selection strategies.

The estimator credits an ad with its value once per relevant, detected,
currently-present vehicle that has not already received that ad, and takes
the credit back when the vehicle leaves or the ad is broadcast to it.
Estimates are stored as contributor counts, so R(a, u) = value * count is
exact and enter/exit round trips restore state bit for bit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import Ad, DistanceMetric, VehicleProfile, ad_value, distances_to, is_relevant

__all__ = [
    "SelectionParams",
    "SelectionStats",
    "RevenueEstimator",
    "select_volfied",
    "select_topk",
    "select_random",
    "is_conflict_free",
    "structurally_conflict_free",
]


@dataclass(frozen=True)
class SelectionParams:
    k: int  # broadcast budget per PoA per step
    m: int  # display budget per vehicle per step
    d_max: float
    metric: DistanceMetric

    def __post_init__(self):
        if self.k < 1 or self.m < 1:
            raise ValueError(f"k and m must be >= 1, got k={self.k} m={self.m}")
        if not self.d_max > 0:
            raise ValueError(f"d_max must be > 0, got {self.d_max}")
        if self.k < self.m:
            warnings.warn(
                f"k={self.k} < m={self.m}: broadcast budget below display budget",
                UserWarning,
                stacklevel=2,
            )


@dataclass
class SelectionStats:
    """Instrumentation filled in by select_volfied."""

    distance_evals: int = 0


class _PoaState:
    """Candidate arrays and contributor bookkeeping for one PoA."""

    __slots__ = ("ads", "ids", "pos_of", "feats", "values", "counts", "contrib")

    def __init__(self, poa_id: int, ads: list[Ad]):
        self.ads = list(ads)
        self.ids = np.array([a.ad_id for a in ads], dtype=np.int64)
        if len(set(self.ids.tolist())) != len(ads):
            raise ValueError(f"duplicate ad ids in candidates for poa {poa_id}")
        self.pos_of = {a.ad_id: i for i, a in enumerate(ads)}
        self.feats = (
            np.stack([a.features for a in ads]) if ads else np.zeros((0, 0))
        )
        self.values = np.array([ad_value(a, poa_id) for a in ads], dtype=float)
        self.counts = np.zeros(len(ads), dtype=np.int64)
        # vehicle id -> positions currently credited; keys are exactly the
        # detected vehicles present under this PoA
        self.contrib: dict[int, set[int]] = {}


class RevenueEstimator:
    """Incremental R(a, u) over fixed per-PoA candidate sets.

    `registry` maps vehicle id to the set of ad ids already broadcast
    while that vehicle was present and detected; such pairs never earn
    credit again anywhere.
    """

    def __init__(self, params: SelectionParams, candidates_by_poa: dict[int, list[Ad]]):
        self.params = params
        self.registry: dict[int, set[int]] = {}
        self._poas = {pid: _PoaState(pid, ads) for pid, ads in candidates_by_poa.items()}
        # per-event instrumentation: ads touched by the last / any event
        self.last_event_examined = 0
        self.max_event_examined = 0

    def candidate_ads(self, poa: int) -> list[Ad]:
        return self._poas[poa].ads

    def revenue(self, poa: int, ad_id: int) -> float:
        st = self._poas[poa]
        pos = st.pos_of[ad_id]
        return float(st.values[pos] * st.counts[pos])

    def detected_present(self, poa: int) -> set[int]:
        return set(self._poas[poa].contrib)

    def _note_event(self, examined: int) -> None:
        self.last_event_examined = examined
        if examined > self.max_event_examined:
            self.max_event_examined = examined

    def on_vehicle_enter(self, poa: int, v: VehicleProfile, detected: bool) -> None:
        """Credit every candidate ad relevant to v, unless already served.

        Undetected vehicles leave no trace: the broker never saw them.
        """
        if not detected:
            self._note_event(0)
            return
        st = self._poas[poa]
        if v.vehicle_id in st.contrib:
            raise ValueError(f"vehicle {v.vehicle_id} already present under poa {poa}")
        if st.ids.size == 0:
            st.contrib[v.vehicle_id] = set()
            self._note_event(0)
            return
        dists = distances_to(self.params.metric, v.interests, st.feats)
        relevant = np.flatnonzero((dists <= self.params.d_max) & (st.values > 0))
        self._note_event(int(relevant.size))
        served = self.registry.get(v.vehicle_id)
        if served:
            relevant = np.array(
                [p for p in relevant if int(st.ids[p]) not in served], dtype=np.int64
            )
        st.counts[relevant] += 1
        st.contrib[v.vehicle_id] = set(int(p) for p in relevant)

    def on_vehicle_exit(self, poa: int, vehicle_id: int) -> None:
        """Remove the vehicle's credits; no-op for vehicles never detected."""
        st = self._poas[poa]
        positions = st.contrib.pop(vehicle_id, None)
        if positions is None:
            self._note_event(0)
            return
        self._note_event(len(positions))
        for p in positions:
            st.counts[p] -= 1

    def on_broadcast(self, poa: int, selected: list[int]) -> None:
        """Register the broadcast for every detected vehicle present and
        withdraw their pending credit for the selected ads."""
        if not selected:
            return
        st = self._poas[poa]
        for ad_id in selected:
            pos = st.pos_of[ad_id]
            for vid in st.contrib:
                self.registry.setdefault(vid, set()).add(ad_id)
                if pos in st.contrib[vid]:
                    st.contrib[vid].discard(pos)
                    st.counts[pos] -= 1

    def _positive_by_revenue(self, poa: int) -> list[tuple[int, float, int]]:
        """(position, R, ad_id) for positive-estimate ads, ordered by
        R descending then AdId ascending."""
        st = self._poas[poa]
        positions = np.flatnonzero(st.counts > 0)
        entries = [
            (int(p), float(st.values[p] * st.counts[p]), int(st.ids[p])) for p in positions
        ]
        entries.sort(key=lambda e: (-e[1], e[2]))
        return entries


def select_volfied(
    est: RevenueEstimator,
    poa: int,
    params: SelectionParams,
    stats: SelectionStats | None = None,
) -> list[int]:
    """Greedy conflict-free selection.

    Scans candidates by estimated revenue (descending, AdId ascending on
    ties) and admits an ad only while fewer than m already-admitted ads
    lie within 2*d_max of it; stops at k admitted. Zero-estimate ads are
    skipped: they cannot contribute revenue but could block a slot.
    """
    st = est._poas[poa]
    chosen: list[int] = []
    chosen_feats: list[np.ndarray] = []
    for pos, _, ad_id in est._positive_by_revenue(poa):
        if len(chosen) >= params.k:
            break
        if chosen_feats:
            d = distances_to(params.metric, st.feats[pos], np.stack(chosen_feats))
            if stats is not None:
                stats.distance_evals += len(chosen_feats)
            blockers = int(np.count_nonzero(d <= 2.0 * params.d_max))
        else:
            blockers = 0
        if blockers < params.m:
            chosen.append(ad_id)
            chosen_feats.append(st.feats[pos])
    return chosen


def select_topk(est: RevenueEstimator, poa: int, params: SelectionParams) -> list[int]:
    """The k highest positive-estimate ads."""
    return [ad_id for _, _, ad_id in est._positive_by_revenue(poa)[: params.k]]


def select_random(
    est: RevenueEstimator,
    poa: int,
    params: SelectionParams,
    rng_stream: np.random.Generator,
) -> list[int]:
    """Uniform sample without replacement from the positive-estimate ads."""
    positive = sorted(ad_id for _, _, ad_id in est._positive_by_revenue(poa))
    if not positive:
        return []
    size = min(params.k, len(positive))
    picked = rng_stream.choice(np.array(positive, dtype=np.int64), size=size, replace=False)
    return [int(x) for x in picked]


def is_conflict_free(
    selected: list[Ad], vehicles: list[VehicleProfile], params: SelectionParams
) -> bool:
    """True iff no vehicle has more than m relevant ads among `selected`.

    Relevance here is the feature-space test alone; pair it with
    structurally_conflict_free to certify against every possible vehicle
    rather than a sampled population.
    """
    if not selected:
        return True
    feats = np.stack([a.features for a in selected])
    for v in vehicles:
        d = distances_to(params.metric, v.interests, feats)
        if int(np.count_nonzero(d <= params.d_max)) > params.m:
            return False
    return True


def structurally_conflict_free(selected: list[Ad], params: SelectionParams) -> bool:
    """Certify the greedy invariant on an ordered set: each ad saw fewer
    than m predecessors within 2*d_max. By the triangle inequality this
    rules out conflicts for arbitrary vehicles, not just sampled ones."""
    for i, a in enumerate(selected):
        if i == 0:
            continue
        prior = np.stack([b.features for b in selected[:i]])
        d = distances_to(params.metric, a.features, prior)
        if int(np.count_nonzero(d <= 2.0 * params.d_max)) >= params.m:
            return False
    return True
