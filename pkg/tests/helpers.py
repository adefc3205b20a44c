"""Shared test utilities: random item generation and independent oracles."""

import math
from ipaddress import IPv4Address, IPv6Address
from random import Random

import numpy as np

from geogossip.wire import DiscoveryItem


def random_item(rng: Random, node_id: int | None = None) -> DiscoveryItem:
    lon = rng.uniform(-180.0, 180.0)
    if lon >= 180.0:
        lon = -180.0
    if rng.random() < 0.5:
        address = IPv4Address(rng.getrandbits(32))
    else:
        address = IPv6Address(rng.getrandbits(128))
    return DiscoveryItem(
        node_id=rng.getrandbits(64) if node_id is None else node_id,
        latitude=rng.uniform(-90.0, 90.0),
        longitude=lon,
        radius=rng.uniform(0.0, 50_000.0),
        address=address,
        timestamp_ms=rng.getrandbits(64),
    )


def mc_overlap_area(r1: float, r2: float, d: float, samples: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of the intersection area of two planar disks
    (radius r1 at origin, radius r2 at (d, 0)) by rejection sampling inside
    the first disk.  Returns (estimate, standard error)."""
    rng = np.random.default_rng(seed)
    u = rng.random(samples)
    theta = rng.random(samples) * 2.0 * np.pi
    rad = r1 * np.sqrt(u)
    x = rad * np.cos(theta)
    y = rad * np.sin(theta)
    inside = (x - d) ** 2 + y ** 2 < r2 * r2
    p = inside.mean()
    disk1 = math.pi * r1 * r1
    stderr = disk1 * math.sqrt(max(p * (1.0 - p), 1e-30) / samples)
    return disk1 * p, stderr
