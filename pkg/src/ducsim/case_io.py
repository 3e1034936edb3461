"""Case, partition and run-configuration files, plus seeded synthetic cases.

Case JSON::

    {"buses": [0, 1, ...],
     "generators": [{"id", "bus", "p_min", "p_max", "cost_dispatch", "cost_commit",
                     "cost_startup", "cost_shutdown", "min_up", "min_down", "ramp"}],
     "lines": [{"from", "to", "susceptance", "f_max"}],
     "demand": {"<bus id>": [T values]},
     "horizon": T}

Partition JSON: ``{"region_count": n, "owner": {"<bus id>": region}}``.

Run configuration: flat ``key = value`` lines mirroring :class:`RunConfig`;
``#`` starts a comment.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from .case_model import Generator, Partition, PowerCase, TransmissionLine, validate_case

GENERATOR_FIELDS = (
    "id", "bus", "p_min", "p_max", "cost_dispatch", "cost_commit",
    "cost_startup", "cost_shutdown", "min_up", "min_down", "ramp",
)
MODES = ("async", "sync", "central")
EXCHANGES = ("consensus", "literal")


class CaseFormatError(ValueError):
    """A file could not be parsed, or parsed into an invalid value."""


@dataclass
class RunConfig:
    rho_theta: float = 2.0
    rho_f: float = 2.0
    rho_p: float = 2.0
    alpha: float = 1e-3
    beta: float = 1e-4
    zeta: int = 3
    max_iters: int = 500
    mip_gap: float = 1e-3
    qp_tol: float = 1e-6
    seed: int = 0
    latency_model: str = "constant(1)"
    compute_model: str = "measured"
    # per-region multiplier applied to synthetic compute times, e.g. {2: 10.0}
    compute_scale: Dict[int, float] = field(default_factory=dict)
    node_limit: int = 20000
    # "consensus" (sign-consistent pairwise rule) or "literal"
    exchange: str = "consensus"
    mode: str = "async"

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ValueError("invalid run configuration: " + "; ".join(problems))

    def violations(self):
        out = []
        for name in ("rho_theta", "rho_f", "rho_p", "alpha", "beta", "mip_gap", "qp_tol"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be > 0")
        if self.zeta < 1:
            out.append("zeta must be >= 1")
        if self.max_iters < 1:
            out.append("max_iters must be >= 1")
        if self.exchange not in EXCHANGES:
            out.append(f"exchange must be one of {EXCHANGES}")
        if self.mode not in MODES:
            out.append(f"mode must be one of {MODES}")
        return out

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name == "compute_scale":
                value = ",".join(f"{r}:{s:g}" for r, s in sorted(value.items()))
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


def _coerce(name: str, raw: str):
    types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    if name not in types:
        raise CaseFormatError(f"config: unknown key {name!r}")
    kind = types[name]
    try:
        if name == "compute_scale":
            out = {}
            for item in filter(None, (s.strip() for s in raw.split(","))):
                r, s = item.split(":")
                out[int(r)] = float(s)
            return out
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
    except ValueError as exc:
        raise CaseFormatError(f"config: bad value for {name}: {raw!r}") from exc
    return raw


def parse_config(text: str, **overrides) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CaseFormatError(f"config line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        values[key] = _coerce(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def load_config(path, **overrides) -> RunConfig:
    return parse_config(Path(path).read_text(), **overrides)


def save_config(config: RunConfig, path) -> None:
    Path(path).write_text(config.to_text())


def case_to_dict(case: PowerCase) -> dict:
    return {
        "buses": list(case.buses),
        "generators": [{k: getattr(g, k) for k in GENERATOR_FIELDS} for g in case.generators],
        "lines": [
            {"from": ln.from_bus, "to": ln.to_bus, "susceptance": ln.susceptance, "f_max": ln.f_max}
            for ln in case.lines
        ],
        "demand": {str(b): [float(v) for v in case.demand[i]] for i, b in enumerate(case.buses)},
        "horizon": case.horizon,
    }


def _require(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise CaseFormatError(f"{where}: missing field {key!r}")
    return obj[key]


def case_from_dict(data: dict, validate: bool = True) -> PowerCase:
    horizon = int(_require(data, "horizon", "case"))
    buses = [int(b) for b in _require(data, "buses", "case")]
    gens = []
    for i, g in enumerate(_require(data, "generators", "case")):
        where = f"generators[{i}]"
        vals = {k: _require(g, k, where) for k in GENERATOR_FIELDS}
        for k in ("id", "bus", "min_up", "min_down"):
            vals[k] = int(vals[k])
        gens.append(Generator(**vals))
    lines = []
    for i, ln in enumerate(_require(data, "lines", "case")):
        where = f"lines[{i}]"
        line = TransmissionLine(
            int(_require(ln, "from", where)),
            int(_require(ln, "to", where)),
            float(_require(ln, "susceptance", where)),
            float(_require(ln, "f_max", where)),
        )
        lines.append(line.canonical())
    demand_map = _require(data, "demand", "case")
    rows = []
    for b in buses:
        row = demand_map.get(str(b), demand_map.get(b))
        if row is None:
            raise CaseFormatError(f"demand: missing row for bus {b}")
        if len(row) != horizon:
            raise CaseFormatError(f"demand[{b}]: expected {horizon} values, got {len(row)}")
        rows.append([float(v) for v in row])
    case = PowerCase(tuple(buses), tuple(sorted(gens, key=lambda g: g.id)), tuple(lines), np.array(rows).reshape(len(buses), horizon), horizon)
    if validate:
        problems = validate_case(case)
        if problems:
            raise CaseFormatError("invalid case: " + "; ".join(problems))
    return case


def dumps_case(case: PowerCase) -> str:
    return json.dumps(case_to_dict(case), indent=1, sort_keys=True) + "\n"


def save_case(case: PowerCase, path) -> None:
    Path(path).write_text(dumps_case(case))


def load_case(path) -> PowerCase:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CaseFormatError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    return case_from_dict(data)


def partition_to_dict(partition: Partition) -> dict:
    return {
        "region_count": partition.region_count,
        "owner": {str(b): r for b, r in enumerate(partition.owner)},
    }


def partition_from_dict(data: dict, n_buses: Optional[int] = None) -> Partition:
    count = int(_require(data, "region_count", "partition"))
    owner_raw = _require(data, "owner", "partition")
    if isinstance(owner_raw, list):
        pairs = []
        for item in owner_raw:
            pairs.append((int(item[0]), int(item[1])))
    else:
        pairs = [(int(b), int(r)) for b, r in owner_raw.items()]
    seen: Dict[int, int] = {}
    for b, r in pairs:
        if b in seen:
            raise CaseFormatError(f"partition: bus {b} owned twice")
        seen[b] = r
    n = n_buses if n_buses is not None else (max(seen) + 1 if seen else 0)
    missing = [b for b in range(n) if b not in seen]
    if missing:
        raise CaseFormatError(f"partition: total map violated, buses {missing} have no owner")
    extra = [b for b in seen if not 0 <= b < n]
    if extra:
        raise CaseFormatError(f"partition: unknown buses {sorted(extra)}")
    part = Partition(tuple(seen[b] for b in range(n)), count)
    problems = part.violations(n)
    if problems:
        raise CaseFormatError("; ".join(problems))
    return part


def save_partition(partition: Partition, path) -> None:
    Path(path).write_text(json.dumps(partition_to_dict(partition), indent=1, sort_keys=True) + "\n")


def load_partition(path, n_buses: Optional[int] = None) -> Partition:
    """Load a partition; duplicate keys in the JSON object count as double ownership."""
    text = Path(path).read_text()

    def pairs_hook(pairs):
        keys = [k for k, _ in pairs]
        if len(keys) != len(set(keys)) and all(k.isdigit() for k in keys):
            dup = sorted({k for k in keys if keys.count(k) > 1})
            raise CaseFormatError(f"partition: bus {dup[0]} owned twice")
        return dict(pairs)

    try:
        data = json.loads(text, object_pairs_hook=pairs_hook)
    except json.JSONDecodeError as exc:
        raise CaseFormatError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    return partition_from_dict(data, n_buses)


def _daily_profile(horizon: int) -> np.ndarray:
    t = np.arange(horizon)
    if horizon == 1:
        return np.ones(1)
    # trough before dawn, peak in the early evening for a 24-period day
    return 0.75 + 0.25 * np.sin(2 * np.pi * (t - 7) / 24.0)


def gen_synthetic(n_buses: int, n_regions: int, horizon: int, seed: int) -> Tuple[PowerCase, Partition]:
    """Seeded synthetic case with contiguous regions.

    The network is a spanning tree (built region by region so every region is
    connected on its own) plus a few extra lines. Installed capacity is at
    least 1.3 times peak total demand.
    """
    if n_regions < 1 or n_buses < n_regions:
        raise ValueError(f"need n_buses >= n_regions >= 1, got {n_buses}, {n_regions}")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rng = np.random.default_rng(seed)

    sizes = np.full(n_regions, n_buses // n_regions)
    sizes[: n_buses % n_regions] += 1
    owner = np.repeat(np.arange(n_regions), sizes)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])

    pairs = set()
    for r in range(n_regions):
        block = list(range(starts[r], starts[r] + sizes[r]))
        for i in range(1, len(block)):
            pairs.add((block[int(rng.integers(0, i))], block[i]))
        if r > 0:
            prev = int(rng.integers(0, r))
            a = int(rng.integers(starts[prev], starts[prev] + sizes[prev]))
            b = int(rng.integers(starts[r], starts[r] + sizes[r]))
            pairs.add((min(a, b), max(a, b)))
    extra = max(0, n_buses // 4)
    attempts = 0
    while extra and attempts < 100 * n_buses and n_buses > 2:
        attempts += 1
        a, b = sorted(int(v) for v in rng.choice(n_buses, size=2, replace=False))
        if (a, b) in pairs or abs(int(owner[a]) - int(owner[b])) > 1:
            continue
        pairs.add((a, b))
        extra -= 1

    profile = _daily_profile(horizon)
    loaded = rng.random(n_buses) < 0.7
    loaded[rng.integers(0, n_buses)] = True
    base = np.where(loaded, rng.uniform(5.0, 25.0, n_buses), 0.0)
    noise = rng.uniform(0.97, 1.03, (n_buses, horizon))
    demand = np.round(base[:, None] * profile[None, :] * noise, 3)
    peak = float(demand.sum(axis=0).max())

    n_gen = max(n_regions, int(round(n_buses / 3)))
    gen_bus = [int(rng.integers(starts[r], starts[r] + sizes[r])) for r in range(n_regions)]
    gen_bus += [int(b) for b in rng.integers(0, n_buses, n_gen - n_regions)]
    gen_bus.sort()
    raw_cap = rng.uniform(0.5, 1.5, n_gen)
    scale = rng.uniform(1.4, 1.8) * max(peak, 1.0) / raw_cap.sum()
    gens = []
    for i, bus in enumerate(gen_bus):
        p_max = round(float(raw_cap[i] * scale), 3)
        p_min = round(p_max * float(rng.uniform(0.1, 0.3)), 3)
        gens.append(
            Generator(
                id=i,
                bus=bus,
                p_min=p_min,
                p_max=p_max,
                cost_dispatch=round(float(rng.uniform(10.0, 40.0)), 2),
                cost_commit=round(float(rng.uniform(5.0, 20.0)), 2),
                cost_startup=round(float(rng.uniform(20.0, 100.0)), 2),
                cost_shutdown=round(float(rng.uniform(0.0, 20.0)), 2),
                min_up=int(rng.integers(1, 4)),
                min_down=int(rng.integers(1, 4)),
                ramp=round(max(p_min, p_max * float(rng.uniform(0.5, 1.0))), 3),
            )
        )

    lines = []
    for a, b in sorted(pairs):
        lines.append(
            TransmissionLine(
                a,
                b,
                round(float(rng.uniform(5.0, 20.0)), 3),
                round(float(rng.uniform(0.6, 1.2)) * peak, 3),
            )
        )

    case = PowerCase(tuple(range(n_buses)), tuple(gens), tuple(lines), demand, horizon)
    partition = Partition(tuple(int(r) for r in owner), n_regions)
    assert not validate_case(case), validate_case(case)
    return case, partition
