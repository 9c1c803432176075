"""On-board runtime: what a vehicle displays each step and what it caches.

Each step the vehicle pools the survivors of its cache with newly received
relevant ads, shows the closest ones (at most m, never repeating an ad),
and keeps the next closest in a bounded cache for later steps. The cache
lets short dwell times under a PoA pay off after the vehicle leaves
coverage.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .broker import SelectionParams
from .model import Ad, VehicleProfile, distance, is_relevant

__all__ = ["VehicleState", "step_display"]


@dataclass
class VehicleState:
    """Mutable per-vehicle runtime state.

    `displayed` only ever grows: an ad is shown to a vehicle at most once.
    `cache` holds (ad, distance) pairs sorted by (distance, ad_id), disjoint
    from `displayed`, and no larger than the cache capacity.
    """

    profile: VehicleProfile
    displayed: set[int] = field(default_factory=set)
    cache: list[tuple[Ad, float]] = field(default_factory=list)
    x_m: float = 0.0
    y_m: float = 0.0


def step_display(
    state: VehicleState,
    received: Iterable[Ad],
    current_poa: int | None,
    params: SelectionParams,
    cache_capacity: int = 0,
) -> list[tuple[int, float]]:
    """Advance one display step; returns the impressions made as
    (ad_id, distance) pairs.

    Pool = still-valid cache entries plus received ads that are relevant
    at the current location and not yet displayed. The m pool entries
    closest to the profile (ties by lower ad id) are displayed; of the
    remainder the closest `cache_capacity` are kept, the rest dropped.
    Cached Local ads are invalidated the moment the vehicle is no longer
    under their target PoA.
    """
    if cache_capacity < 0:
        raise ValueError("cache_capacity must be >= 0")
    profile = state.profile
    pool: dict[int, tuple[Ad, float]] = {}
    for ad, dist in state.cache:
        if ad.ad_id in state.displayed:
            continue
        if not (ad.is_global or ad.target_poa == current_poa):
            continue
        pool[ad.ad_id] = (ad, dist)
    for ad in received:
        if ad.ad_id in state.displayed or ad.ad_id in pool:
            continue
        if not is_relevant(ad, profile, current_poa, params.d_max, params.metric):
            continue
        pool[ad.ad_id] = (ad, distance(params.metric, ad.features, profile.interests))

    ranked = sorted(pool.values(), key=lambda pair: (pair[1], pair[0].ad_id))
    shown = ranked[: params.m]
    state.cache = ranked[params.m : params.m + cache_capacity]

    impressions = []
    for ad, dist in shown:
        state.displayed.add(ad.ad_id)
        impressions.append((ad.ad_id, dist))
    return impressions
