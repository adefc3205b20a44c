"""Random peer sampling: bounded partial view refreshed by push-pull gossip.

Each node keeps a small random sample of the overlay (the random view).
Every round it exchanges a buffer of descriptors with one partner; merged
descriptors are deduplicated by node id, aged each round, and the oldest
are evicted when the view overflows.  Aging doubles as churn cleanup:
descriptors of dead nodes stop being refreshed and fall out.
"""

from dataclasses import dataclass
from random import Random

from .wire import DiscoveryItem


class EmptySeedError(Exception):
    """A joining node was given no seed descriptors."""


class EmptyViewError(Exception):
    """No peer available to exchange with."""


@dataclass
class PeerDescriptor:
    item: DiscoveryItem
    age: int  # gossip rounds since the item was created
    salted: int = 0  # owner-salted eviction tie-break, filled on insert


def descriptor_from_item(item: DiscoveryItem, now_ms: int, period_ms: int) -> PeerDescriptor:
    """Derive a descriptor whose age is reconstructed from the item timestamp."""
    age = max(0, (now_ms - item.timestamp_ms) // period_ms) if period_ms > 0 else 0
    return PeerDescriptor(item, int(age))


class RandomView:
    def __init__(self, owner_id: int, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.owner_id = owner_id
        self.capacity = capacity
        self.entries: dict[int, PeerDescriptor] = {}

    def __len__(self):
        return len(self.entries)

    def __contains__(self, node_id: int):
        return node_id in self.entries

    def ids(self):
        return self.entries.keys()

    def items(self):
        return [d.item for d in self.entries.values()]

    def drop(self, node_id: int):
        self.entries.pop(node_id, None)

    def tick(self):
        for desc in self.entries.values():
            desc.age += 1

    def merge(self, received):
        """Merge received descriptors: dedup keeping the freshest copy,
        never store self, evict the oldest entries past capacity."""
        salt = self.owner_id
        for desc in received:
            nid = desc.item.node_id
            if nid == salt:
                continue
            cur = self.entries.get(nid)
            if cur is None or (desc.age, -desc.item.timestamp_ms) < (cur.age, -cur.item.timestamp_ms):
                self.entries[nid] = PeerDescriptor(desc.item, desc.age, hash((salt, nid)))
        self._evict()

    def merge_items(self, items, now_ms: int, period_ms: int):
        """Merge raw items, ages reconstructed from their timestamps."""
        salt = self.owner_id
        entries_get = self.entries.get
        for item in items:
            nid = item.node_id
            if nid == salt:
                continue
            age = (now_ms - item.timestamp_ms) // period_ms if period_ms > 0 else 0
            if age < 0:
                age = 0
            cur = entries_get(nid)
            if cur is None or (age, -item.timestamp_ms) < (cur.age, -cur.item.timestamp_ms):
                self.entries[nid] = PeerDescriptor(item, age, hash((salt, nid)))
        self._evict()

    def _evict(self):
        if len(self.entries) > self.capacity:
            # age/timestamp ties are common (items minted the same round), so
            # the last tie-break is the owner-salted hash: a plain id ordering
            # would evict the same nodes from every view in the overlay
            ranked = sorted(
                self.entries.values(),
                key=lambda d: (d.age, -d.item.timestamp_ms, d.salted),
            )
            self.entries = {d.item.node_id: d for d in ranked[: self.capacity]}


def bootstrap(owner_id: int, seeds: list[DiscoveryItem], capacity: int) -> RandomView:
    """Initial view for a joining node, built from seed descriptors at age 0."""
    if not seeds:
        raise EmptySeedError(f"node {owner_id} has no seeds")
    view = RandomView(owner_id, capacity)
    view.merge(PeerDescriptor(item, 0) for item in seeds)
    return view


def sample_partner(view: RandomView, rng: Random, strategy: str = "oldest") -> int:
    """Pick the exchange partner: oldest-age (healer-biased, the default)
    or uniform.  Age ties are broken uniformly at random."""
    if not view.entries:
        raise EmptyViewError(f"node {view.owner_id} has an empty random view")
    if strategy == "uniform":
        return rng.choice(sorted(view.entries))
    max_age = max(d.age for d in view.entries.values())
    oldest = sorted(nid for nid, d in view.entries.items() if d.age == max_age)
    return rng.choice(oldest)


def make_push_buffer(
    view: RandomView, own_item: DiscoveryItem, half: int, rng: Random
) -> list[DiscoveryItem]:
    """Push buffer: own fresh descriptor first, then up to `half` random entries."""
    others = sorted(view.entries)
    picked = rng.sample(others, min(half, len(others)))
    return [own_item] + [view.entries[n].item for n in picked]


def sample_exchange(
    view: RandomView,
    own_item: DiscoveryItem,
    half: int,
    rng: Random,
    strategy: str = "oldest",
) -> tuple[int, list[DiscoveryItem]]:
    """One initiated exchange: returns (partner id, push buffer)."""
    partner = sample_partner(view, rng, strategy)
    return partner, make_push_buffer(view, own_item, half, rng)


def merge_random(view: RandomView, received, now_ms: int, period_ms: int) -> RandomView:
    """Merge received items into the view (ages derived from timestamps)."""
    view.merge_items(received, now_ms, period_ms)
    return view
