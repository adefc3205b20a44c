"""Scenario definition, generation, churn schedules, and file round-trip.

A scenario is the full deterministic input to the simulator: node
placement, protocol parameters, seed nodes, churn schedule, and the RNG
seed.  The file format is line-oriented text (key = value header plus
sectioned tables) so generated files are byte-identical for equal inputs.
"""

import math
from dataclasses import dataclass, field, replace
from ipaddress import IPv6Address
from random import Random

from .geometry import EARTH_RADIUS_M, GeoPoint

METERS_PER_DEG_LAT = EARTH_RADIUS_M * math.pi / 180.0

_ADDR_BASE = 0x2001_0DB8 << 96


class InvalidRegionError(ValueError):
    """Region bounding box is empty or malformed."""


class ScenarioFormatError(ValueError):
    """Scenario file could not be parsed."""


def address_for(node_id: int) -> IPv6Address:
    """Deterministic synthetic endpoint for a simulated node."""
    return IPv6Address(_ADDR_BASE | (node_id & ((1 << 64) - 1)))


@dataclass
class Params:
    c_rand: int = 30
    sample_half: int = 15
    c_rank: int = 20
    c_far: int = 3
    p_far: float = 0.1
    recent_rounds: int = 5
    period_seconds: float = 15.0
    stale_rounds: int = 10
    partner_strategy: str = "oldest"

    @property
    def period_ms(self) -> int:
        return int(round(self.period_seconds * 1000))

    @property
    def stale_ms(self) -> int:
        return self.stale_rounds * self.period_ms


@dataclass
class NodeSpec:
    node_id: int
    latitude: float
    longitude: float
    radius: float


@dataclass
class ChurnEvent:
    round: int
    op: str  # "join" or "leave"
    node: NodeSpec | None = None  # join payload
    node_id: int | None = None  # leave target

    def __post_init__(self):
        if self.op == "join" and self.node is None:
            raise ValueError("join event needs a NodeSpec")
        if self.op == "leave" and self.node_id is None:
            raise ValueError("leave event needs a node id")
        if self.op not in ("join", "leave"):
            raise ValueError(f"unknown churn op: {self.op}")


@dataclass
class Scenario:
    nodes: list[NodeSpec]
    seeds: list[int]
    params: Params = field(default_factory=Params)
    churn: list[ChurnEvent] = field(default_factory=list)
    rng_seed: int = 0

    def __post_init__(self):
        ids = [n.node_id for n in self.nodes]
        if len(ids) != len(set(ids)):
            raise ValueError("node ids must be unique")
        initial = set(ids)
        missing = [s for s in self.seeds if s not in initial]
        if missing:
            raise ValueError(f"seeds not present at round 0: {missing}")
        if self.params.period_seconds <= 0:
            raise ValueError("period must be positive")


def _radius_law(spec) -> tuple[float, float]:
    """Normalize a radius law to a (lo, hi) uniform range."""
    if isinstance(spec, (int, float)):
        return float(spec), float(spec)
    if isinstance(spec, tuple):
        lo, hi = float(spec[0]), float(spec[1])
    elif isinstance(spec, str):
        kind, _, rest = spec.partition(":")
        if kind == "fixed":
            lo = hi = float(rest)
        elif kind == "uniform":
            a, b = rest.split(",")
            lo, hi = float(a), float(b)
        else:
            raise ValueError(f"unknown radius law: {spec!r}")
    else:
        raise ValueError(f"unknown radius law: {spec!r}")
    if lo < 0 or hi < lo:
        raise ValueError(f"bad radius range: {lo}..{hi}")
    return lo, hi


DEFAULT_ORIGIN = GeoPoint(59.91, 10.75)


def _to_geo(x: float, y: float, origin: GeoPoint) -> tuple[float, float]:
    lat = origin.latitude + y / METERS_PER_DEG_LAT
    lon = origin.longitude + x / (METERS_PER_DEG_LAT * math.cos(math.radians(origin.latitude)))
    return lat, lon


def generate_scenario(
    n: int,
    region: tuple[float, float],
    radius_law,
    rng_seed: int,
    origin: GeoPoint = DEFAULT_ORIGIN,
    params: Params | None = None,
) -> Scenario:
    """Place n nodes uniformly in a width x height (meters) box.

    The seed node is the one farthest from the node centroid, so discovery
    always starts from an unfavorable corner of the deployment.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    width, height = region
    if not (width > 0 and height > 0 and math.isfinite(width) and math.isfinite(height)):
        raise InvalidRegionError(f"bad region: {region!r}")
    lo, hi = _radius_law(radius_law)
    rng = Random(rng_seed)
    xs, ys, nodes = [], [], []
    for i in range(n):
        x = rng.uniform(0.0, width)
        y = rng.uniform(0.0, height)
        r = lo if lo == hi else rng.uniform(lo, hi)
        lat, lon = _to_geo(x, y, origin)
        nodes.append(NodeSpec(i + 1, lat, lon, r))
        xs.append(x)
        ys.append(y)
    cx = sum(xs) / n
    cy = sum(ys) / n
    seed_idx = max(range(n), key=lambda i: ((xs[i] - cx) ** 2 + (ys[i] - cy) ** 2, -i))
    return Scenario(
        nodes=nodes,
        seeds=[nodes[seed_idx].node_id],
        params=params if params is not None else Params(),
        rng_seed=rng_seed,
    )


def add_random_churn(
    scenario: Scenario,
    rounds: int,
    rate: float,
    region: tuple[float, float],
    radius_law,
    origin: GeoPoint = DEFAULT_ORIGIN,
    start_round: int = 0,
) -> Scenario:
    """Append a join+leave schedule: each round, `rate` fraction of the
    current population joins (fresh ids) and the same count leaves.
    Seed nodes are never removed so joiners always have a bootstrap point."""
    rng = Random(scenario.rng_seed ^ 0xC4A12)
    lo, hi = _radius_law(radius_law)
    width, height = region
    live = {n.node_id for n in scenario.nodes}
    protected = set(scenario.seeds)
    next_id = max(live) + 1
    events = list(scenario.churn)
    for r in range(start_round, start_round + rounds):
        count = int(round(rate * len(live)))
        for _ in range(count):
            x, y = rng.uniform(0.0, width), rng.uniform(0.0, height)
            radius = lo if lo == hi else rng.uniform(lo, hi)
            lat, lon = _to_geo(x, y, origin)
            events.append(ChurnEvent(r, "join", node=NodeSpec(next_id, lat, lon, radius)))
            live.add(next_id)
            next_id += 1
        removable = sorted(live - protected)
        for _ in range(count):
            if not removable:
                break
            victim = removable.pop(rng.randrange(len(removable)))
            events.append(ChurnEvent(r, "leave", node_id=victim))
            live.discard(victim)
    return replace(scenario, churn=events)


def four_node_demo(params: Params | None = None, rng_seed: int = 1) -> Scenario:
    """Four nodes A(1), B(2), C(3), D(4) arranged so that the big-disk
    node D overlaps everyone, C overlaps only D, and A and B overlap each
    other and D."""
    origin = DEFAULT_ORIGIN
    placements = [
        (1, 0.0, 0.0, 100.0),    # A
        (2, 150.0, 0.0, 100.0),  # B
        (3, 75.0, 480.0, 50.0),  # C
        (4, 75.0, 200.0, 300.0), # D
    ]
    nodes = []
    for nid, x, y, r in placements:
        lat, lon = _to_geo(x, y, origin)
        nodes.append(NodeSpec(nid, lat, lon, r))
    return Scenario(
        nodes=nodes,
        seeds=[1],
        params=params if params is not None else Params(),
        rng_seed=rng_seed,
    )


# --- scenario file round trip ------------------------------------------------

_PARAM_FIELDS = (
    ("c_rand", int),
    ("sample_half", int),
    ("c_rank", int),
    ("c_far", int),
    ("p_far", float),
    ("recent_rounds", int),
    ("period_seconds", float),
    ("stale_rounds", int),
    ("partner_strategy", str),
)


def dumps(s: Scenario) -> str:
    lines = ["# geogossip scenario v1", f"rng_seed = {s.rng_seed}"]
    for name, _ in _PARAM_FIELDS:
        value = getattr(s.params, name)
        lines.append(f"{name} = {value if isinstance(value, str) else repr(value)}")
    lines.append("")
    lines.append("[nodes]")
    lines.append("# id latitude longitude radius_m")
    for n in s.nodes:
        lines.append(f"{n.node_id} {n.latitude!r} {n.longitude!r} {n.radius!r}")
    lines.append("")
    lines.append("[seeds]")
    for sid in s.seeds:
        lines.append(str(sid))
    if s.churn:
        lines.append("")
        lines.append("[churn]")
        lines.append("# round op id [latitude longitude radius_m]")
        for ev in s.churn:
            if ev.op == "join":
                n = ev.node
                lines.append(
                    f"{ev.round} join {n.node_id} {n.latitude!r} {n.longitude!r} {n.radius!r}"
                )
            else:
                lines.append(f"{ev.round} leave {ev.node_id}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> Scenario:
    header: dict[str, str] = {}
    section = None
    nodes: list[NodeSpec] = []
    seeds: list[int] = []
    churn: list[ChurnEvent] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            continue
        try:
            if section is None:
                key, _, value = line.partition("=")
                header[key.strip()] = value.strip()
            elif section == "nodes":
                nid, lat, lon, r = line.split()
                nodes.append(NodeSpec(int(nid), float(lat), float(lon), float(r)))
            elif section == "seeds":
                seeds.append(int(line))
            elif section == "churn":
                parts = line.split()
                rnd, op = int(parts[0]), parts[1]
                if op == "join":
                    churn.append(ChurnEvent(rnd, "join", node=NodeSpec(
                        int(parts[2]), float(parts[3]), float(parts[4]), float(parts[5]))))
                elif op == "leave":
                    churn.append(ChurnEvent(rnd, "leave", node_id=int(parts[2])))
                else:
                    raise ValueError(f"unknown churn op {op!r}")
            else:
                raise ValueError(f"unknown section {section!r}")
        except ValueError as exc:
            raise ScenarioFormatError(f"line {lineno}: {exc}") from exc
    params = Params()
    for name, conv in _PARAM_FIELDS:
        if name in header:
            setattr(params, name, conv(header[name]))
    try:
        return Scenario(
            nodes=nodes,
            seeds=seeds,
            params=params,
            churn=churn,
            rng_seed=int(header.get("rng_seed", "0")),
        )
    except ValueError as exc:
        raise ScenarioFormatError(str(exc)) from exc


def save_scenario(s: Scenario, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps(s))


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="ascii") as fh:
        return loads(fh.read())
