from collections import Counter
from dataclasses import replace
from random import Random

import pytest
from scipy.stats import chisquare

from geogossip.sampling import (
    EmptySeedError,
    EmptyViewError,
    PeerDescriptor,
    RandomView,
    bootstrap,
    descriptor_from_item,
    make_push_buffer,
    merge_random,
    sample_exchange,
    sample_partner,
)
from helpers import random_item


def fill(view, rng, n, age=0, ts=None):
    items = []
    for i in range(n):
        item = random_item(rng, node_id=1000 + i)
        if ts is not None:
            item = replace(item, timestamp_ms=ts)
        items.append(item)
    view.merge(PeerDescriptor(it, age) for it in items)
    return items


class TestRandomView:
    def test_never_stores_self(self):
        rng = Random(20)
        view = RandomView(owner_id=1000, capacity=10)
        fill(view, rng, 5)
        assert 1000 not in view

    def test_dedup_keeps_freshest(self):
        rng = Random(21)
        view = RandomView(owner_id=1, capacity=10)
        item = random_item(rng, node_id=5)
        view.merge([PeerDescriptor(item, 4)])
        newer = replace(item, timestamp_ms=item.timestamp_ms)
        view.merge([PeerDescriptor(newer, 1)])
        assert view.entries[5].age == 1
        view.merge([PeerDescriptor(item, 3)])
        assert view.entries[5].age == 1  # older copy ignored

    def test_capacity_bound_evicts_oldest(self):
        rng = Random(22)
        view = RandomView(owner_id=1, capacity=10)
        fill(view, rng, 10, age=5)
        young = [random_item(rng, node_id=2000 + i) for i in range(4)]
        view.merge(PeerDescriptor(it, 0) for it in young)
        assert len(view) == 10
        for it in young:
            assert it.node_id in view

    def test_tick_ages_everything(self):
        rng = Random(23)
        view = RandomView(owner_id=1, capacity=10)
        fill(view, rng, 4, age=2)
        view.tick()
        assert all(d.age == 3 for d in view.entries.values())

    def test_capacity_validation(self):
        with pytest.raises(ValueError):
            RandomView(owner_id=1, capacity=0)

    def test_eviction_not_id_biased(self):
        # equal-age ties must not systematically evict the same ids from
        # every view, or high ids would vanish overlay-wide
        rng = Random(24)
        items = [replace(random_item(rng, node_id=i), timestamp_ms=1000) for i in range(40)]
        survivors = Counter()
        for owner in range(200):
            view = RandomView(owner_id=10_000 + owner, capacity=20)
            view.merge(PeerDescriptor(it, 1) for it in items)
            for nid in view.ids():
                survivors[nid] += 1
        assert len(survivors) == 40  # every id survives in some view


class TestBootstrap:
    def test_empty_seed_list_rejected(self):
        with pytest.raises(EmptySeedError):
            bootstrap(owner_id=1, seeds=[], capacity=10)

    def test_seeds_enter_at_age_zero(self):
        rng = Random(25)
        seeds = [random_item(rng, node_id=i) for i in range(3)]
        view = bootstrap(owner_id=99, seeds=seeds, capacity=10)
        assert sorted(view.ids()) == [0, 1, 2]
        assert all(d.age == 0 for d in view.entries.values())


class TestPartnerSelection:
    def test_empty_view_raises(self):
        view = RandomView(owner_id=1, capacity=10)
        with pytest.raises(EmptyViewError):
            sample_partner(view, Random(0))

    def test_oldest_strategy_picks_max_age(self):
        rng = Random(26)
        view = RandomView(owner_id=1, capacity=10)
        fill(view, rng, 5, age=1)
        old = random_item(rng, node_id=9999)
        view.merge([PeerDescriptor(old, 7)])
        for _ in range(20):
            assert sample_partner(view, rng, "oldest") == 9999

    def test_tie_break_uniform_chi_square(self):
        # 50 equal-age entries, 10k draws: frequencies consistent with uniform
        rng = Random(27)
        view = RandomView(owner_id=1, capacity=60)
        fill(view, rng, 50, age=3)
        counts = Counter(sample_partner(view, rng, "oldest") for _ in range(10_000))
        assert len(counts) == 50
        _, p = chisquare(list(counts.values()))
        assert p > 0.01

    def test_uniform_strategy_chi_square(self):
        rng = Random(28)
        view = RandomView(owner_id=1, capacity=60)
        fill(view, rng, 50, age=3)
        old = random_item(rng, node_id=7777)
        view.merge([PeerDescriptor(old, 9)])
        counts = Counter(sample_partner(view, rng, "uniform") for _ in range(10_200))
        assert len(counts) == 51
        _, p = chisquare(list(counts.values()))
        assert p > 0.01


class TestBuffers:
    def test_own_item_first(self):
        rng = Random(29)
        view = RandomView(owner_id=1, capacity=40)
        fill(view, rng, 30)
        own = random_item(rng, node_id=1)
        buf = make_push_buffer(view, own, half=15, rng=rng)
        assert buf[0] is own
        assert len(buf) == 16
        assert len({i.node_id for i in buf}) == 16

    def test_buffer_capped_by_view_size(self):
        rng = Random(30)
        view = RandomView(owner_id=1, capacity=40)
        fill(view, rng, 4)
        own = random_item(rng, node_id=1)
        buf = make_push_buffer(view, own, half=15, rng=rng)
        assert len(buf) == 5

    def test_sample_exchange_returns_partner_and_buffer(self):
        rng = Random(31)
        view = RandomView(owner_id=1, capacity=40)
        fill(view, rng, 20, age=2)
        own = random_item(rng, node_id=1)
        partner, buf = sample_exchange(view, own, half=15, rng=rng)
        assert partner in view
        assert buf[0] is own


class TestAgeFromTimestamp:
    def test_age_reconstruction(self):
        rng = Random(32)
        item = random_item(rng, node_id=3)
        item = replace(item, timestamp_ms=100_000)
        desc = descriptor_from_item(item, now_ms=160_000, period_ms=15_000)
        assert desc.age == 4

    def test_future_timestamp_clamps_to_zero(self):
        rng = Random(33)
        item = random_item(rng, node_id=3)
        item = replace(item, timestamp_ms=200_000)
        desc = descriptor_from_item(item, now_ms=100_000, period_ms=15_000)
        assert desc.age == 0

    def test_merge_random_uses_derived_ages(self):
        rng = Random(34)
        view = RandomView(owner_id=1, capacity=10)
        fresh = replace(random_item(rng, node_id=2), timestamp_ms=90_000)
        merge_random(view, [fresh], now_ms=120_000, period_ms=15_000)
        assert view.entries[2].age == 2
