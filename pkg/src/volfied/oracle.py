"""Exact single-step revenue maximization by exhaustive enumeration.

Small instances decompose per PoA because each vehicle associates with at
most one PoA and display history is fixed within the step, so the optimal
broadcast for one PoA is independent of the others. Per PoA, every subset
of eligible ads up to size k is priced through the same display rule the
vehicles execute, and the best subset wins (ties resolved toward the
lexicographically smallest ad id set).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .broker import SelectionParams
from .model import Ad, DistanceMetric, VehicleProfile, ad_value, distance, is_relevant

__all__ = [
    "MAX_CANDIDATES",
    "MAX_K",
    "OracleInstance",
    "OracleResult",
    "instance_from_json",
    "instance_to_json",
    "result_to_json",
    "simulate_display",
    "solve_exact",
]

MAX_CANDIDATES = 15
MAX_K = 5


@dataclass(frozen=True)
class OracleInstance:
    """A single time step: catalog, covered vehicles, and display history.

    `coverage` maps vehicle_id to the PoA it currently associates with
    (None = out of coverage); one PoA per vehicle by construction.
    `displayed` carries the ads each vehicle has already shown.
    """

    ads: tuple[Ad, ...]
    vehicles: tuple[VehicleProfile, ...]
    coverage: dict[int, int | None]
    params: SelectionParams
    displayed: dict[int, frozenset[int]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "ads", tuple(self.ads))
        object.__setattr__(self, "vehicles", tuple(self.vehicles))
        ids = [a.ad_id for a in self.ads]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate ad ids in instance")
        vids = {v.vehicle_id for v in self.vehicles}
        if len(vids) != len(self.vehicles):
            raise ValueError("duplicate vehicle ids in instance")
        for label, mapping in (("coverage", self.coverage), ("displayed", self.displayed)):
            unknown = set(mapping) - vids
            if unknown:
                raise ValueError(f"{label} references unknown vehicles: {sorted(unknown)}")


@dataclass(frozen=True)
class OracleResult:
    broadcasts: dict[int, tuple[int, ...]]
    revenue: float


def simulate_display(
    broadcast: Mapping[int, Sequence[int]],
    instance: OracleInstance,
) -> tuple[dict[int, list[int]], float]:
    """Price a broadcast: each covered vehicle displays the m most relevant
    received ads it has not shown before (smallest distance, ties by ad id).

    Returns (per-vehicle displayed ad ids, total revenue). The revenue is
    accumulated per PoA in ascending PoA id, vehicles in ascending id, so
    repeated pricings of the same broadcast are bit-identical.
    """
    params = instance.params
    by_id = {a.ad_id: a for a in instance.ads}
    clean: dict[int, list[int]] = {}
    for pid, ad_ids in broadcast.items():
        unique = list(dict.fromkeys(ad_ids))
        if len(unique) > params.k:
            raise ValueError(f"broadcast at PoA {pid} has {len(unique)} ads, k={params.k}")
        for ad_id in unique:
            if ad_id not in by_id:
                raise ValueError(f"broadcast references unknown ad {ad_id}")
        clean[pid] = unique

    displays: dict[int, list[int]] = {v.vehicle_id: [] for v in instance.vehicles}
    per_poa: dict[int, list[VehicleProfile]] = {}
    for prof in instance.vehicles:
        poa = instance.coverage.get(prof.vehicle_id)
        if poa is not None and poa in clean:
            per_poa.setdefault(poa, []).append(prof)

    revenue = 0.0
    for poa in sorted(per_poa):
        subtotal = 0.0
        for prof in sorted(per_poa[poa], key=lambda p: p.vehicle_id):
            seen = instance.displayed.get(prof.vehicle_id, frozenset())
            pool = []
            for ad_id in clean[poa]:
                if ad_id in seen:
                    continue
                ad = by_id[ad_id]
                if not is_relevant(ad, prof, poa, params.d_max, params.metric):
                    continue
                d = distance(params.metric, ad.features, prof.interests)
                pool.append((d, ad_id, ad))
            pool.sort(key=lambda t: (t[0], t[1]))
            for _, ad_id, ad in pool[: params.m]:
                displays[prof.vehicle_id].append(ad_id)
                subtotal += ad_value(ad, poa)
        revenue += subtotal
    return displays, revenue


def solve_exact(instance: OracleInstance) -> OracleResult:
    """Optimal broadcast per PoA by exhaustive enumeration.

    Eligible ads at a PoA are those with positive value there (Global, or
    Local with matching target). Raises ValueError when the instance
    exceeds the enumeration budget (more than 15 eligible ads at one PoA,
    or k above 5).
    """
    params = instance.params
    if params.k > MAX_K:
        raise ValueError(f"enumeration budget exceeded: k={params.k} (max {MAX_K})")

    poa_ids = sorted({p for p in instance.coverage.values() if p is not None})
    by_vid = {v.vehicle_id: v for v in instance.vehicles}
    broadcasts: dict[int, tuple[int, ...]] = {}
    for poa in poa_ids:
        candidates = sorted(
            (a for a in instance.ads if ad_value(a, poa) > 0.0),
            key=lambda a: a.ad_id,
        )
        if len(candidates) > MAX_CANDIDATES:
            raise ValueError(
                f"enumeration budget exceeded: {len(candidates)} eligible ads "
                f"at PoA {poa} (max {MAX_CANDIDATES})"
            )
        # per-vehicle relevant candidates, closest first, priced once
        menus: list[list[tuple[int, float]]] = []
        covered = sorted(
            vid for vid, p in instance.coverage.items() if p == poa
        )
        for vid in covered:
            prof = by_vid[vid]
            seen = instance.displayed.get(vid, frozenset())
            entries = []
            for ad in candidates:
                if ad.ad_id in seen:
                    continue
                if not is_relevant(ad, prof, poa, params.d_max, params.metric):
                    continue
                d = distance(params.metric, ad.features, prof.interests)
                entries.append((d, ad.ad_id, ad_value(ad, poa)))
            entries.sort()
            if entries:
                menus.append([(ad_id, value) for _, ad_id, value in entries])

        cand_ids = [a.ad_id for a in candidates]
        best_rev = 0.0
        best_ids: tuple[int, ...] = ()
        m = params.m
        for r in range(1, min(params.k, len(cand_ids)) + 1):
            for combo in itertools.combinations(cand_ids, r):
                chosen = frozenset(combo)
                rev = 0.0
                for menu in menus:
                    shown = 0
                    for ad_id, value in menu:
                        if ad_id in chosen:
                            rev += value
                            shown += 1
                            if shown == m:
                                break
                if rev > best_rev or (rev == best_rev and combo < best_ids):
                    best_rev = rev
                    best_ids = combo
        broadcasts[poa] = best_ids

    _, revenue = simulate_display(broadcasts, instance)
    return OracleResult(broadcasts=broadcasts, revenue=revenue)


def instance_to_json(instance: OracleInstance) -> dict:
    """Plain-JSON form of an instance (file format of the oracle command)."""
    doc = {
        "params": {
            "k": instance.params.k,
            "m": instance.params.m,
            "d_max": instance.params.d_max,
            "metric": instance.params.metric.value,
        },
        "ads": [
            {
                "ad_id": a.ad_id,
                "features": [float(x) for x in np.asarray(a.features, dtype=float)],
                "base_value": a.base_value,
                "target_poa": a.target_poa,
            }
            for a in instance.ads
        ],
        "vehicles": [
            {
                "vehicle_id": v.vehicle_id,
                "interests": [float(x) for x in np.asarray(v.interests, dtype=float)],
            }
            for v in instance.vehicles
        ],
        "coverage": {str(vid): poa for vid, poa in instance.coverage.items()},
    }
    if instance.displayed:
        doc["displayed"] = {
            str(vid): sorted(ads) for vid, ads in instance.displayed.items()
        }
    return doc


def instance_from_json(doc: dict) -> OracleInstance:
    try:
        p = doc["params"]
        params = SelectionParams(
            k=int(p["k"]),
            m=int(p["m"]),
            d_max=float(p["d_max"]),
            metric=DistanceMetric(p["metric"]),
        )
        ads = tuple(
            Ad(
                ad_id=int(a["ad_id"]),
                features=np.array(a["features"], dtype=float),
                base_value=float(a["base_value"]),
                target_poa=None if a.get("target_poa") is None else int(a["target_poa"]),
            )
            for a in doc["ads"]
        )
        vehicles = tuple(
            VehicleProfile(
                vehicle_id=int(v["vehicle_id"]),
                interests=np.array(v["interests"], dtype=float),
            )
            for v in doc["vehicles"]
        )
        coverage = {
            int(vid): (None if poa is None else int(poa))
            for vid, poa in doc["coverage"].items()
        }
        displayed = {
            int(vid): frozenset(int(a) for a in ads_)
            for vid, ads_ in doc.get("displayed", {}).items()
        }
    except KeyError as exc:
        raise ValueError(f"instance file missing field: {exc.args[0]}") from exc
    return OracleInstance(
        ads=ads, vehicles=vehicles, coverage=coverage, params=params, displayed=displayed
    )


def result_to_json(result: OracleResult) -> dict:
    return {
        "broadcasts": {str(pid): list(ads) for pid, ads in result.broadcasts.items()},
        "revenue": result.revenue,
    }
