"""Deterministic round-based discovery simulator.

One round = one 15-second gossip period.  Every live node, in a seeded
shuffled order, runs one random-sampling exchange and one ranked-overlay
exchange (both push-pull, both atomic).  Churn events apply at the start
of their round; leaves are silent crashes.  All randomness flows through
a single seeded generator, so a scenario replays bit-identically.
"""

import csv
from collections import deque
from dataclasses import dataclass, field
from random import Random

import numpy as np

from .geometry import distances_np
from .overlay import RankedView, buffer_for, candidate_list, select_target
from .sampling import (
    EmptyViewError,
    PeerDescriptor,
    RandomView,
    make_push_buffer,
    merge_random,
    sample_partner,
)
from .scenario import ChurnEvent, NodeSpec, Params, Scenario, address_for
from .wire import FRAME_LEN, DiscoveryItem


class UnknownNodeError(KeyError):
    """Churn event refers to a node that is not alive."""


@dataclass
class MetricsRow:
    round: int
    mean_recall: float
    min_recall: float
    bytes_sent_mean: float
    live_nodes: int
    mean_recall_settled: float | None = None


@dataclass
class MetricsSeries:
    rows: list[MetricsRow] = field(default_factory=list)
    total_bytes: int = 0
    total_descriptors: int = 0
    node_rounds: int = 0

    def append(self, row: MetricsRow):
        self.rows.append(row)

    def mean_bytes_per_second(self, period_seconds: float) -> float:
        if self.node_rounds == 0:
            return 0.0
        return self.total_bytes / self.node_rounds / period_seconds

    def final_recall(self) -> float:
        return self.rows[-1].mean_recall if self.rows else 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["round", "mean_recall", "min_recall", "bytes_sent_mean", "live_nodes"])
            for row in self.rows:
                writer.writerow(
                    [row.round, repr(row.mean_recall), repr(row.min_recall),
                     repr(row.bytes_sent_mean), row.live_nodes]
                )


def convergence_round(series: MetricsSeries, threshold: float) -> int | None:
    """First round whose mean recall reaches the threshold, or None."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1]: {threshold}")
    for row in series.rows:
        if row.mean_recall >= threshold:
            return row.round
    return None


def _geometry_tables(specs: list[NodeSpec]):
    """(ids, radii, full pairwise distance matrix) for a membership set."""
    ids = [s.node_id for s in specs]
    lats = np.array([s.latitude for s in specs])
    lons = np.array([s.longitude for s in specs])
    rads = np.array([s.radius for s in specs])
    n = len(specs)
    dmat = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        dmat[i] = distances_np(lats[i], lons[i], lats, lons)
    return ids, rads, dmat


def _ground_truth_from_tables(ids, rads, dmat) -> dict[int, set[int]]:
    gt: dict[int, set[int]] = {}
    for i, nid in enumerate(ids):
        near = dmat[i] < rads[i] + rads
        near[i] = False
        gt[nid] = {ids[j] for j in np.nonzero(near)[0]}
    return gt


def compute_ground_truth(specs: list[NodeSpec]) -> dict[int, set[int]]:
    """Exhaustive pairwise candidate sets (the O(n^2) oracle).

    Built from the same vectorized haversine matrix the simulator feeds
    to overlay scoring, so oracle and protocol never disagree on a
    borderline pair.
    """
    if not specs:
        return {}
    return _ground_truth_from_tables(*_geometry_tables(specs))


def _matrix_lookup(row, idx):
    """Bulk distance resolver over one row of the pairwise matrix."""
    def lookup(items):
        get = idx.get
        return [row[j] if (j := get(it.node_id)) is not None else None for it in items]
    return lookup


def live_specs_at(scenario: Scenario, round_index: int) -> list[NodeSpec]:
    """Membership after applying all churn events up to and including the round."""
    specs = {s.node_id: s for s in scenario.nodes}
    for ev in scenario.churn:
        if ev.round > round_index:
            continue
        if ev.op == "join":
            specs[ev.node.node_id] = ev.node
        else:
            if ev.node_id not in specs:
                raise UnknownNodeError(ev.node_id)
            del specs[ev.node_id]
    return list(specs.values())


def ground_truth(scenario: Scenario, round_index: int = 0) -> dict[int, set[int]]:
    return compute_ground_truth(live_specs_at(scenario, round_index))


class _Node:
    __slots__ = ("spec", "address", "random_view", "ranked", "far", "recent",
                 "join_round", "dist_lookup", "_own")

    def __init__(self, spec: NodeSpec, params: Params, address, join_round: int):
        self.spec = spec
        self.address = address
        self.join_round = join_round
        self.random_view = RandomView(spec.node_id, params.c_rand)
        self.ranked = RankedView(
            spec.node_id, spec.latitude, spec.longitude, spec.radius, params.c_rank
        )
        self.far: list[DiscoveryItem] = []
        self.recent: deque[int] = deque(maxlen=params.recent_rounds)
        self.dist_lookup = None  # set by the simulation's table rebuild
        self._own: DiscoveryItem | None = None

    def own_item(self, now_ms: int) -> DiscoveryItem:
        # reused within a round: several exchanges stamp the same timestamp
        own = self._own
        if own is None or own.timestamp_ms != now_ms:
            own = self._own = DiscoveryItem(
                self.spec.node_id, self.spec.latitude, self.spec.longitude,
                self.spec.radius, self.address, now_ms,
            )
        return own


class Simulation:
    """Engine for one scenario.  Construct, then run(rounds).

    delegates maps a privacy node id to the node that fronts its agent:
    every item the privacy node emits then carries the delegate's
    endpoint instead of its own.  Protocol decisions never read
    addresses, so a delegated run is otherwise identical.
    """

    def __init__(self, scenario: Scenario, delegates: dict[int, int] | None = None,
                 collect_emitted: bool = False):
        self.scenario = scenario
        self.params = scenario.params
        self.delegates = delegates or {}
        self.rng = Random(scenario.rng_seed)
        self.round = 0
        self.nodes: dict[int, _Node] = {}
        self.series = MetricsSeries()
        self.emitted: set[tuple[int, object]] | None = set() if collect_emitted else None
        self._gt: dict[int, set[int]] | None = None
        self._churn_by_round: dict[int, list[ChurnEvent]] = {}
        for ev in scenario.churn:
            self._churn_by_round.setdefault(ev.round, []).append(ev)
        # create every round-0 node before bootstrapping any of them, so
        # each one can reach the designated seed regardless of id order;
        # distance tables go in between so even bootstrap scoring reads
        # the shared matrix
        for spec in scenario.nodes:
            self._create_node(spec, join_round=0)
        self._rebuild_tables()
        for spec in scenario.nodes:
            self._bootstrap_node(self.nodes[spec.node_id], now_ms=0)

    # -- membership ---------------------------------------------------------

    def _endpoint(self, node_id: int):
        return address_for(self.delegates.get(node_id, node_id))

    def _create_node(self, spec: NodeSpec, join_round: int) -> _Node:
        if spec.node_id in self.nodes:
            raise ValueError(f"node {spec.node_id} already alive")
        node = _Node(spec, self.params, self._endpoint(spec.node_id), join_round)
        self.nodes[spec.node_id] = node
        self._gt = None
        return node

    def _bootstrap_node(self, node: _Node, now_ms: int):
        own_id = node.spec.node_id
        seeds = [
            self.nodes[sid].own_item(now_ms)
            for sid in self.scenario.seeds
            if sid != own_id and sid in self.nodes
        ]
        if not seeds and len(self.nodes) > 1 and own_id not in self.scenario.seeds:
            # all designated seeds are gone; fall back to a random live introducer
            others = sorted(set(self.nodes) - {own_id})
            seeds = [self.nodes[self.rng.choice(others)].own_item(now_ms)]
        if seeds:
            node.random_view.merge(PeerDescriptor(item, 0) for item in seeds)
            node.ranked.merge(seeds, now_ms, self.params.stale_ms)

    def apply_churn(self, events: list[ChurnEvent], now_ms: int | None = None):
        if now_ms is None:
            now_ms = self.round * self.params.period_ms
        joined: list[_Node] = []
        for ev in events:
            if ev.op == "join":
                joined.append(self._create_node(ev.node, join_round=self.round))
            else:
                if ev.node_id not in self.nodes:
                    raise UnknownNodeError(ev.node_id)
                del self.nodes[ev.node_id]
                self._gt = None
        if self._gt is None:
            self._rebuild_tables()
        for node in joined:
            self._bootstrap_node(node, now_ms)

    def _rebuild_tables(self):
        """Recompute the pairwise distance matrix, ground truth, and each
        node's matrix-backed distance resolver for the current membership."""
        if not self.nodes:
            self._gt = {}
            return
        specs = [n.spec for n in self.nodes.values()]
        ids = [s.node_id for s in specs]
        lats = np.array([s.latitude for s in specs])
        lons = np.array([s.longitude for s in specs])
        rads = np.array([s.radius for s in specs])
        idx = {nid: i for i, nid in enumerate(ids)}
        gt: dict[int, set[int]] = {}
        for i, nid in enumerate(ids):
            row = distances_np(lats[i], lons[i], lats, lons)
            near = row < rads[i] + rads
            near[i] = False
            gt[nid] = {ids[j] for j in np.nonzero(near)[0]}
            node = self.nodes[nid]
            # plain-list rows: scalar indexing in the hot lookup path is
            # several times faster than indexing a numpy row
            node.dist_lookup = _matrix_lookup(row.tolist(), idx)
            node.ranked.distance_fn = node.dist_lookup
        self._gt = gt

    def _forget(self, node: _Node, dead_id: int):
        node.random_view.drop(dead_id)
        node.ranked.drop(dead_id)
        node.far = [i for i in node.far if i.node_id != dead_id]

    # -- exchanges ----------------------------------------------------------

    def _record(self, sender: _Node, buf: list[DiscoveryItem], sent: dict[int, int]):
        sent[sender.spec.node_id] = sent.get(sender.spec.node_id, 0) + FRAME_LEN * len(buf)
        self.series.total_bytes += FRAME_LEN * len(buf)
        self.series.total_descriptors += len(buf)
        if self.emitted is not None:
            for item in buf:
                self.emitted.add((item.node_id, item.address))

    def _sampling_exchange(self, node: _Node, now_ms: int, sent: dict[int, int]):
        if not node.random_view.entries:
            return
        partner_id = sample_partner(node.random_view, self.rng, self.params.partner_strategy)
        partner = self.nodes.get(partner_id)
        if partner is None:
            self._forget(node, partner_id)
            return
        buf_a = make_push_buffer(
            node.random_view, node.own_item(now_ms), self.params.sample_half, self.rng
        )
        buf_b = make_push_buffer(
            partner.random_view, partner.own_item(now_ms), self.params.sample_half, self.rng
        )
        self._record(node, buf_a, sent)
        self._record(partner, buf_b, sent)
        period_ms = self.params.period_ms
        merge_random(partner.random_view, buf_a, now_ms, period_ms)
        partner.ranked.merge(buf_a, now_ms, self.params.stale_ms)
        merge_random(node.random_view, buf_b, now_ms, period_ms)
        node.ranked.merge(buf_b, now_ms, self.params.stale_ms)

    def _overlay_buffer(self, node: _Node, peer: _Node, now_ms: int) -> list[DiscoveryItem]:
        return buffer_for(
            node.ranked, node.random_view, node.own_item(now_ms),
            peer.spec.latitude, peer.spec.longitude, peer.spec.radius,
            limit=self.params.c_rank + self.params.c_rand,
            distance_fn=peer.dist_lookup,
        )

    def _overlay_exchange(self, node: _Node, now_ms: int, sent: dict[int, int]):
        try:
            target_id = select_target(
                node.ranked, node.far, set(node.recent), self.rng, self.params.p_far,
                now_ms=now_ms, stale_ms=self.params.stale_ms,
            )
        except EmptyViewError:
            return
        target = self.nodes.get(target_id)
        if target is None:
            self._forget(node, target_id)
            return
        node.recent.append(target_id)
        buf_a = self._overlay_buffer(node, target, now_ms)
        buf_b = self._overlay_buffer(target, node, now_ms)
        self._record(node, buf_a, sent)
        self._record(target, buf_b, sent)
        target.ranked.merge(buf_a, now_ms, self.params.stale_ms)
        node.ranked.merge(buf_b, now_ms, self.params.stale_ms)

    def _refresh_far(self, node: _Node):
        ids = sorted(node.random_view.entries)
        if not ids:
            return
        picked = self.rng.sample(ids, min(self.params.c_far, len(ids)))
        node.far = [node.random_view.entries[nid].item for nid in picked]

    # -- rounds -------------------------------------------------------------

    def step(self) -> MetricsRow:
        now_ms = self.round * self.params.period_ms
        self.apply_churn(self._churn_by_round.get(self.round, []), now_ms)
        if self._gt is None:
            self._rebuild_tables()
        sent: dict[int, int] = {}
        order = sorted(self.nodes)
        self.rng.shuffle(order)
        for nid in order:
            node = self.nodes.get(nid)
            if node is None:
                continue
            self._refresh_far(node)
            self._sampling_exchange(node, now_ms, sent)
            self._overlay_exchange(node, now_ms, sent)
        for node in self.nodes.values():
            node.random_view.tick()
        row = self._measure(sent)
        self.series.append(row)
        self.series.node_rounds += row.live_nodes
        self.round += 1
        return row

    def _measure(self, sent: dict[int, int]) -> MetricsRow:
        live = list(self.nodes.values())
        recalls = []
        settled = []
        for node in live:
            gt = self._gt.get(node.spec.node_id, set())
            if gt:
                found = node.ranked.candidate_ids()
                recall = len(found & gt) / len(gt)
            else:
                recall = 1.0
            recalls.append(recall)
            if self.round - node.join_round >= 10:
                settled.append(recall)
        n = len(live)
        total_sent = sum(sent.values())
        return MetricsRow(
            round=self.round,
            mean_recall=sum(recalls) / n if n else 1.0,
            min_recall=min(recalls) if recalls else 1.0,
            bytes_sent_mean=total_sent / n if n else 0.0,
            live_nodes=n,
            mean_recall_settled=sum(settled) / len(settled) if settled else None,
        )

    def run(self, rounds: int) -> MetricsSeries:
        for _ in range(rounds):
            self.step()
        return self.series

    def candidate_lists(self) -> dict[int, list[tuple[DiscoveryItem, float]]]:
        return {
            nid: candidate_list(node.ranked, node.random_view)
            for nid, node in sorted(self.nodes.items())
        }


def run(scenario: Scenario, rounds: int, delegates: dict[int, int] | None = None) -> MetricsSeries:
    return Simulation(scenario, delegates=delegates).run(rounds)
