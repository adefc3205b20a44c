"""Utility-ranked proximity overlay.

Each node keeps a ranked view of the most relevant peers it has heard
of, gossips with high-utility targets to learn about even better ones,
and emits its candidate list: every known node whose coordination area
overlaps its own.  True candidates are pinned: they are never pushed out
by the capacity cut, only by staleness.

Overlap area alone has no gradient outside the overlap horizon, so the
ranking falls back to center distance for zero-utility entries; that
gradient is what lets a node walk toward its own neighborhood from a
distant starting point.  A few far links (random distant peers) keep
the overlay connected and speed up discovery for joiners.
"""

from dataclasses import dataclass, field
from operator import attrgetter
from random import Random

import numpy as np

from .geometry import distances_np, overlap_area_f
from .sampling import EmptyViewError, RandomView
from .wire import DiscoveryItem


@dataclass
class RankedEntry:
    item: DiscoveryItem
    utility: float
    dist: float
    candidate: bool
    # utility descending, then distance ascending as the below-horizon
    # gradient, node id as the final deterministic tie-break
    key: tuple = field(init=False)

    def __post_init__(self):
        self.key = (-self.utility, self.dist, self.item.node_id)


_entry_key = attrgetter("key")


class RankedView:
    def __init__(self, owner_id: int, lat: float, lon: float, radius: float, capacity: int):
        self.owner_id = owner_id
        self.lat = lat
        self.lon = lon
        self.radius = radius
        self.capacity = capacity
        self.entries: dict[int, RankedEntry] = {}
        # optional bulk distance resolver: items -> list of center distances
        # (None per unknown item).  A host that already holds pairwise
        # distances can plug it in so scoring reuses the exact same values
        # as its oracle instead of recomputing them.
        self.distance_fn = None
        # conservative lower bound on the oldest non-candidate timestamp;
        # lets merge skip the staleness scan while everything is fresh
        self._min_ts = float("inf")

    def __len__(self):
        return len(self.entries)

    def __contains__(self, node_id: int):
        return node_id in self.entries

    def drop(self, node_id: int):
        self.entries.pop(node_id, None)

    def score(self, item: DiscoveryItem) -> tuple[float, float, bool]:
        """(utility, center distance, is-candidate) of an item for this owner."""
        dist = self.distance_fn([item])[0] if self.distance_fn is not None else None
        if dist is None:
            dist = distances_np(self.lat, self.lon, item.latitude, item.longitude)
        dist = float(dist)
        if dist < self.radius + item.radius:
            util = overlap_area_f(self.lat, self.lon, self.radius,
                                  item.latitude, item.longitude, item.radius)
            return util, dist, True
        return 0.0, dist, False

    def sorted_entries(self) -> list[RankedEntry]:
        return sorted(self.entries.values(), key=_entry_key)

    def candidate_ids(self) -> set[int]:
        return {nid for nid, e in self.entries.items() if e.candidate}

    def merge(self, items, now_ms: int, stale_ms: int):
        """Fold received items in: keep the freshest copy per id, re-score
        moved nodes, evict stale entries, truncate non-candidates past
        capacity.  Candidates survive the cut as long as they are fresh."""
        pending: dict[int, DiscoveryItem] = {}
        own = self.owner_id
        entries_get = self.entries.get
        pending_get = pending.get
        for item in items:
            nid = item.node_id
            if nid == own:
                continue
            cur = entries_get(nid)
            if cur is not None:
                if item.timestamp_ms <= cur.item.timestamp_ms:
                    continue
                if (item.latitude == cur.item.latitude
                        and item.longitude == cur.item.longitude
                        and item.radius == cur.item.radius):
                    cur.item = item
                    continue
            prev = pending_get(nid)
            if prev is not None and item.timestamp_ms <= prev.timestamp_ms:
                continue
            pending[nid] = item
        if pending:
            # resolve distances through the host's table when available,
            # otherwise score the batch in one vectorized call
            new = list(pending.values())
            if self.distance_fn is not None:
                dists = self.distance_fn(new)
                missing = [k for k, d in enumerate(dists) if d is None]
            else:
                dists = [None] * len(new)
                missing = list(range(len(new)))
            if missing:
                filled = distances_np(
                    self.lat, self.lon,
                    np.array([new[k].latitude for k in missing]),
                    np.array([new[k].longitude for k in missing]),
                )
                for k, d in zip(missing, filled):
                    dists[k] = d
            for item, dist in zip(new, dists):
                dist = float(dist)
                if dist < self.radius + item.radius:
                    util = overlap_area_f(self.lat, self.lon, self.radius,
                                          item.latitude, item.longitude, item.radius)
                    cand = True
                else:
                    util, cand = 0.0, False
                    if item.timestamp_ms < self._min_ts:
                        self._min_ts = item.timestamp_ms
                self.entries[item.node_id] = RankedEntry(item, util, dist, cand)
        # staleness applies to non-candidates only: a pinned candidate must
        # never drop out while its node is alive (refresh gossip can lag past
        # any fixed window); dead candidates are removed by failed-contact
        # detection instead
        cutoff = now_ms - stale_ms
        if self._min_ts < cutoff:
            stale = [
                nid for nid, e in self.entries.items()
                if not e.candidate and e.item.timestamp_ms < cutoff
            ]
            for nid in stale:
                del self.entries[nid]
            self._min_ts = min(
                (e.item.timestamp_ms for e in self.entries.values() if not e.candidate),
                default=float("inf"),
            )
        if len(self.entries) > self.capacity:
            ranked = sorted(self.entries.values(), key=_entry_key)
            for e in ranked[self.capacity:]:
                if not e.candidate:
                    del self.entries[e.item.node_id]


def rank(owner_id: int, lat: float, lon: float, radius: float,
         known: list[DiscoveryItem], capacity: int,
         now_ms: int | None = None, stale_ms: int | None = None) -> RankedView:
    """Score and rank a batch of known items into a fresh view."""
    view = RankedView(owner_id, lat, lon, radius, capacity)
    if now_ms is None:
        now_ms = max((i.timestamp_ms for i in known), default=0)
    if stale_ms is None:
        stale_ms = now_ms + 1  # nothing stale
    view.merge(known, now_ms, stale_ms)
    return view


def merge_ranked(view: RankedView, received, now_ms: int, stale_ms: int) -> RankedView:
    view.merge(received, now_ms, stale_ms)
    return view


def select_target(view: RankedView, far: list[DiscoveryItem],
                  recent: set[int], rng: Random, p_far: float,
                  now_ms: int | None = None, stale_ms: int | None = None) -> int:
    """Pick the next exchange target: with probability p_far a random far
    link, otherwise a stale candidate in need of a liveness probe,
    otherwise the most relevant entry not contacted recently.

    The probe keeps pinned candidates honest: contacting a live one
    refreshes its descriptor, contacting a dead one removes it via
    failed-contact detection.  Without it, descriptors of dead candidates
    would linger forever and crowd exchange buffers.
    """
    far_ids = sorted({i.node_id for i in far} - {view.owner_id})
    if far_ids and rng.random() < p_far:
        return rng.choice(far_ids)
    if now_ms is not None and stale_ms is not None:
        cutoff = now_ms - stale_ms
        stale = [
            e for nid, e in view.entries.items()
            if e.candidate and nid not in recent and e.item.timestamp_ms < cutoff
        ]
        if stale:
            stale.sort(key=lambda e: (e.item.timestamp_ms, e.item.node_id))
            return stale[0].item.node_id
    best = None
    for entry in view.entries.values():
        if entry.item.node_id in recent:
            continue
        if best is None or entry.key < best.key:
            best = entry
    if best is not None:
        return best.item.node_id
    if far_ids:
        return rng.choice(far_ids)
    if view.entries:
        return rng.choice(sorted(view.entries))
    raise EmptyViewError(f"node {view.owner_id} has no overlay target")


def buffer_for(view: RankedView, random_view: RandomView | None,
               own_item: DiscoveryItem,
               peer_lat: float, peer_lon: float, peer_radius: float,
               limit: int, distance_fn=None) -> list[DiscoveryItem]:
    """Exchange buffer tailored to the receiving peer.

    Own fresh descriptor first, then the known items most relevant to the
    peer: smallest gap between center distance and combined radii, i.e.
    candidates of the peer before near misses before far strangers.

    distance_fn optionally resolves item distances from the *peer's*
    location out of a precomputed table (None per unknown item).
    """
    pool: dict[int, DiscoveryItem] = {e.item.node_id: e.item for e in view.entries.values()}
    if random_view is not None:
        for item in random_view.items():
            pool.setdefault(item.node_id, item)
    pool.pop(own_item.node_id, None)
    if not pool:
        return [own_item]
    items = list(pool.values())
    if distance_fn is not None:
        dists = distance_fn(items)
        missing = [k for k, d in enumerate(dists) if d is None]
    else:
        dists = [None] * len(items)
        missing = list(range(len(items)))
    if missing:
        filled = distances_np(
            peer_lat, peer_lon,
            np.array([items[k].latitude for k in missing]),
            np.array([items[k].longitude for k in missing]),
        )
        for k, d in zip(missing, filled):
            dists[k] = d
    scored = [
        (d - (peer_radius + item.radius), item.node_id, item)
        for item, d in zip(items, dists)
    ]
    scored.sort(key=lambda t: (t[0], t[1]))
    return [own_item] + [t[2] for t in scored[:limit]]


def candidate_list(view: RankedView, random_view: RandomView | None = None
                   ) -> list[tuple[DiscoveryItem, float]]:
    """All known overlapping nodes, utility-descending (ties by id)."""
    best: dict[int, tuple[DiscoveryItem, float]] = {
        nid: (e.item, e.utility) for nid, e in view.entries.items() if e.candidate
    }
    if random_view is not None:
        for item in random_view.items():
            if item.node_id in best:
                continue
            util, _, cand = view.score(item)
            if cand:
                best[item.node_id] = (item, util)
    return sorted(best.values(), key=lambda pair: (-pair[1], pair[0].node_id))


def export_candidate_lines(entries: list[tuple[DiscoveryItem, float]]) -> list[str]:
    """Line-oriented export: node id, address, utility."""
    return [f"{item.node_id}\t{item.address}\t{util!r}" for item, util in entries]
