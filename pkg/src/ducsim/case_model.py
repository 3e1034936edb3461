"""Power network data, region partitions and per-region views.

Ids for buses, generators and regions are dense non-negative integers and every
collection is iterated in ascending id order so that everything built on top of
these types is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    p_min: float
    p_max: float
    cost_dispatch: float
    cost_commit: float
    cost_startup: float
    cost_shutdown: float
    min_up: int
    min_down: int
    ramp: float


@dataclass(frozen=True)
class TransmissionLine:
    """A line between two buses; positive flow runs ``from_bus -> to_bus``."""

    from_bus: int
    to_bus: int
    susceptance: float
    f_max: float

    @property
    def key(self) -> Tuple[int, int]:
        return (min(self.from_bus, self.to_bus), max(self.from_bus, self.to_bus))

    def canonical(self) -> "TransmissionLine":
        if self.from_bus <= self.to_bus:
            return self
        return TransmissionLine(self.to_bus, self.from_bus, self.susceptance, self.f_max)

    def other(self, bus: int) -> int:
        return self.to_bus if bus == self.from_bus else self.from_bus


@dataclass(frozen=True, eq=False)
class PowerCase:
    """Network, generator fleet and per-bus demand over ``horizon`` periods.

    ``demand[b, t]`` is the load in MW at bus ``b`` in period ``t``.
    """

    buses: Tuple[int, ...]
    generators: Tuple[Generator, ...]
    lines: Tuple[TransmissionLine, ...]
    demand: np.ndarray
    horizon: int

    def __post_init__(self):
        demand = np.array(self.demand, dtype=float, copy=True)
        if demand.ndim == 1:
            demand = demand.reshape(len(self.buses), -1)
        demand.setflags(write=False)
        object.__setattr__(self, "buses", tuple(int(b) for b in self.buses))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "demand", demand)
        object.__setattr__(self, "horizon", int(self.horizon))

    def __eq__(self, other):
        if not isinstance(other, PowerCase):
            return NotImplemented
        return (
            self.buses == other.buses
            and self.generators == other.generators
            and self.lines == other.lines
            and self.horizon == other.horizon
            and self.demand.shape == other.demand.shape
            and bool(np.array_equal(self.demand, other.demand))
        )

    __hash__ = None

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    def total_demand(self) -> np.ndarray:
        return self.demand.sum(axis=0)

    def total_capacity(self) -> float:
        return float(sum(g.p_max for g in self.generators))

    def replace(self, **changes) -> "PowerCase":
        fields = dict(
            buses=self.buses,
            generators=self.generators,
            lines=self.lines,
            demand=self.demand,
            horizon=self.horizon,
        )
        fields.update(changes)
        return PowerCase(**fields)


@dataclass(frozen=True)
class Partition:
    """``owner[b]`` is the region owning bus ``b``."""

    owner: Tuple[int, ...]
    region_count: int

    def __post_init__(self):
        object.__setattr__(self, "owner", tuple(int(r) for r in self.owner))

    def buses_of(self, region: int) -> Tuple[int, ...]:
        return tuple(b for b, r in enumerate(self.owner) if r == region)

    def violations(self, n_buses: Optional[int] = None) -> List[str]:
        out = []
        if self.region_count < 1:
            out.append("partition: region_count must be >= 1")
        if n_buses is not None and len(self.owner) != n_buses:
            out.append(
                f"partition: total map violated, {len(self.owner)} owners for {n_buses} buses"
            )
        for b, r in enumerate(self.owner):
            if not 0 <= r < self.region_count:
                out.append(f"partition: bus {b} owned by unknown region {r}")
        owned = set(self.owner)
        for r in range(self.region_count):
            if r not in owned:
                out.append(f"partition: region {r} owns no bus")
        return out


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class RegionView:
    """One region's slice of the network.

    ``channels`` lists the (bus, neighbour) pairs on which the region runs a
    pairwise phase-angle consensus: every bus shared between this region's
    boundary/foreign set and that of the neighbour.
    """

    region: int
    horizon: int
    internal: Tuple[int, ...]
    boundary: Tuple[int, ...]
    foreign: Tuple[int, ...]
    generators: Tuple[Generator, ...]
    tie_lines: Tuple[TransmissionLine, ...]
    local_lines: Tuple[TransmissionLine, ...]
    neighbors: Tuple[int, ...]
    neighbor_of_bus: Dict[int, Tuple[int, ...]]
    adjacency: Dict[int, Tuple[int, ...]]
    foreign_owner: Dict[int, int]
    shared_buses: Dict[int, Tuple[int, ...]]
    demand: np.ndarray = field(repr=False)
    is_reference: bool = False
    reference_bus: Optional[int] = None

    @property
    def owned(self) -> Tuple[int, ...]:
        return tuple(sorted(self.internal + self.boundary))

    @property
    def local_buses(self) -> Tuple[int, ...]:
        """Every bus carrying a phase-angle variable: owned plus foreign."""
        return tuple(sorted(self.internal + self.boundary + self.foreign))

    @property
    def channels(self) -> Tuple[Tuple[int, int], ...]:
        return tuple(
            (b, nb) for nb in self.neighbors for b in self.shared_buses[nb]
        )

    def ties_with(self, neighbor: int) -> Tuple[TransmissionLine, ...]:
        return tuple(
            line
            for line in self.tie_lines
            if self.foreign_owner.get(line.from_bus, self.foreign_owner.get(line.to_bus)) == neighbor
        )

    def owned_demand(self) -> np.ndarray:
        """Demand summed over owned buses, per period."""
        return self.demand.sum(axis=0)


def validate_case(case: PowerCase) -> List[str]:
    """Return a human-readable violation per broken invariant (empty if valid)."""
    out: List[str] = []
    buses = list(case.buses)
    bus_set = set(buses)
    if buses != list(range(len(buses))):
        out.append("buses: ids must be dense 0..n-1 in ascending order")
    if case.horizon < 1:
        out.append("horizon: T must be >= 1")
    if case.demand.shape != (len(buses), case.horizon):
        out.append(
            f"demand: expected shape ({len(buses)}, {case.horizon}), got {case.demand.shape}"
        )
    elif np.any(case.demand < 0) or not np.all(np.isfinite(case.demand)):
        bad = sorted({int(b) for b, _ in zip(*np.nonzero(~(case.demand >= 0)))})
        out.append(f"demand: negative or non-finite values at buses {bad}")

    seen_gen = set()
    for g in case.generators:
        name = f"generator g{g.id}"
        if g.id in seen_gen:
            out.append(f"{name}: duplicate id")
        seen_gen.add(g.id)
        if g.bus not in bus_set:
            out.append(f"{name}: bus {g.bus} not in case")
        if g.p_min < 0:
            out.append(f"{name}: p_min<0")
        if g.p_min > g.p_max:
            out.append(f"{name}: p_min>p_max")
        if g.min_up < 1:
            out.append(f"{name}: min_up<1")
        if g.min_down < 1:
            out.append(f"{name}: min_down<1")
        if g.ramp < 0:
            out.append(f"{name}: ramp<0")
        for attr in ("cost_dispatch", "cost_commit", "cost_startup", "cost_shutdown"):
            if getattr(g, attr) < 0:
                out.append(f"{name}: {attr}<0")
    if sorted(seen_gen) != list(range(len(case.generators))):
        out.append("generators: ids must be dense 0..n-1")

    seen_pairs = set()
    for line in case.lines:
        name = f"line ({line.from_bus},{line.to_bus})"
        if line.from_bus == line.to_bus:
            out.append(f"{name}: from_bus == to_bus")
        for end in (line.from_bus, line.to_bus):
            if end not in bus_set:
                out.append(f"{name}: endpoint {end} not in case")
        if line.susceptance <= 0:
            out.append(f"{name}: susceptance<=0")
        if line.f_max <= 0:
            out.append(f"{name}: f_max<=0")
        if line.key in seen_pairs:
            out.append(f"{name}: duplicate line for bus pair {line.key}")
        seen_pairs.add(line.key)
    return out


def _boundary_and_foreign(case: PowerCase, owner, r: int):
    boundary, foreign = set(), set()
    for line in case.lines:
        a, b = line.from_bus, line.to_bus
        if owner[a] == r and owner[b] != r:
            boundary.add(a)
            foreign.add(b)
        elif owner[b] == r and owner[a] != r:
            boundary.add(b)
            foreign.add(a)
    return boundary, foreign


def classify_region(case: PowerCase, partition: Partition, r: int) -> RegionView:
    """Split region ``r``'s buses into internal/boundary/foreign sets."""
    if not 0 <= r < partition.region_count:
        raise PartitionError(f"unknown region id {r}")
    problems = partition.violations(case.n_buses)
    if problems:
        raise PartitionError("; ".join(problems))
    owner = partition.owner

    owned = {b for b in case.buses if owner[b] == r}
    boundary, foreign = _boundary_and_foreign(case, owner, r)
    internal = owned - boundary

    tie_lines, local_lines = [], []
    neighbor_of_bus: Dict[int, set] = {b: set() for b in boundary}
    adjacency: Dict[int, set] = {b: set() for b in owned}
    for line in sorted((ln.canonical() for ln in case.lines), key=lambda ln: ln.key):
        a, b = line.from_bus, line.to_bus
        if a in owned:
            adjacency[a].add(b)
        if b in owned:
            adjacency[b].add(a)
        if a in owned and b in owned:
            local_lines.append(line)
        elif a in owned or b in owned:
            tie_lines.append(line)
            near, far = (a, b) if a in owned else (b, a)
            neighbor_of_bus[near].add(owner[far])

    neighbors = sorted({owner[v] for v in foreign})
    shared: Dict[int, Tuple[int, ...]] = {}
    mine = boundary | foreign
    for nb in neighbors:
        nb_boundary, nb_foreign = _boundary_and_foreign(case, owner, nb)
        shared[nb] = tuple(sorted(mine & (nb_boundary | nb_foreign)))

    owned_sorted = sorted(owned)
    ref_bus = min(case.buses)
    return RegionView(
        region=r,
        horizon=case.horizon,
        internal=tuple(sorted(internal)),
        boundary=tuple(sorted(boundary)),
        foreign=tuple(sorted(foreign)),
        generators=tuple(sorted((g for g in case.generators if owner[g.bus] == r), key=lambda g: g.id)),
        tie_lines=tuple(tie_lines),
        local_lines=tuple(local_lines),
        neighbors=tuple(neighbors),
        neighbor_of_bus={b: tuple(sorted(v)) for b, v in sorted(neighbor_of_bus.items())},
        adjacency={b: tuple(sorted(v)) for b, v in sorted(adjacency.items())},
        foreign_owner={v: owner[v] for v in sorted(foreign)},
        shared_buses=shared,
        demand=case.demand[owned_sorted],
        is_reference=owner[ref_bus] == r,
        reference_bus=ref_bus if owner[ref_bus] == r else None,
    )


def classify_all(case: PowerCase, partition: Partition) -> List[RegionView]:
    return [classify_region(case, partition, r) for r in range(partition.region_count)]


def whole_network(case: PowerCase) -> RegionView:
    """View of the entire network as a single region (used by the centralized solve)."""
    return classify_region(case, Partition((0,) * case.n_buses, 1), 0)
