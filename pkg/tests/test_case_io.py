import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ducsim.case_io import (
    CaseFormatError, RunConfig, dumps_case, gen_synthetic, load_case, load_config,
    load_partition, parse_config, save_case, save_config, save_partition,
)
from ducsim.case_model import Partition, validate_case


def test_case_round_trip(tmp_path, fx_a):
    case, part = fx_a
    save_case(case, tmp_path / "a.json")
    loaded = load_case(tmp_path / "a.json")
    assert loaded == case
    assert (loaded.n_buses, len(loaded.generators), len(loaded.lines), loaded.horizon) == (2, 2, 1, 2)
    save_partition(part, tmp_path / "p.json")
    assert load_partition(tmp_path / "p.json", n_buses=2) == part


def test_missing_horizon(tmp_path, fx_a):
    data = json.loads(dumps_case(fx_a[0]))
    del data["horizon"]
    (tmp_path / "bad.json").write_text(json.dumps(data))
    with pytest.raises(CaseFormatError, match="missing field 'horizon'"):
        load_case(tmp_path / "bad.json")


def test_invalid_case_rejected(tmp_path, fx_a):
    data = json.loads(dumps_case(fx_a[0]))
    data["generators"][0]["p_min"] = 50.0
    (tmp_path / "bad.json").write_text(json.dumps(data))
    with pytest.raises(CaseFormatError, match="p_min>p_max"):
        load_case(tmp_path / "bad.json")


def test_malformed_json_has_position(tmp_path):
    (tmp_path / "x.json").write_text('{"buses": [0,\n 1,,]}')
    with pytest.raises(CaseFormatError, match="line 2"):
        load_case(tmp_path / "x.json")


def test_synthetic_round_trip(tmp_path, fx_c):
    case, part = fx_c
    save_case(case, tmp_path / "c.json")
    loaded = load_case(tmp_path / "c.json")
    assert validate_case(loaded) == []
    assert loaded == case


def test_partition_owned_twice(tmp_path):
    (tmp_path / "p.json").write_text('{"region_count": 2, "owner": {"0": 0, "1": 1, "1": 0}}')
    with pytest.raises(CaseFormatError, match="bus 1 owned twice"):
        load_partition(tmp_path / "p.json")


def test_partition_total_map(tmp_path):
    (tmp_path / "p.json").write_text('{"region_count": 2, "owner": {"0": 0, "2": 1}}')
    with pytest.raises(CaseFormatError, match="total map"):
        load_partition(tmp_path / "p.json", n_buses=3)


def test_partition_empty_region(tmp_path):
    save_partition(Partition((0, 0), 2), tmp_path / "p.json")
    with pytest.raises(CaseFormatError, match="region 1 owns no bus"):
        load_partition(tmp_path / "p.json")


def test_config_round_trip(tmp_path):
    cfg = RunConfig(rho_theta=7.5, zeta=2, compute_scale={2: 10.0}, latency_model="lognormal(0,0.5)")
    save_config(cfg, tmp_path / "run.cfg")
    assert load_config(tmp_path / "run.cfg") == cfg
    assert load_config(tmp_path / "run.cfg", seed=9, mode="sync").seed == 9


def test_config_defaults_and_errors():
    cfg = parse_config("# defaults only\n")
    assert (cfg.rho_theta, cfg.rho_f, cfg.rho_p, cfg.alpha, cfg.beta, cfg.zeta) == (2.0, 2.0, 2.0, 1e-3, 1e-4, 3)
    assert (cfg.mip_gap, cfg.qp_tol) == (1e-3, 1e-6)
    with pytest.raises(CaseFormatError, match="unknown key"):
        parse_config("rho = 1")
    with pytest.raises(CaseFormatError, match="bad value"):
        parse_config("zeta = three")
    for bad in (dict(rho_theta=0.0), dict(zeta=0), dict(max_iters=0), dict(alpha=-1.0), dict(mode="x")):
        with pytest.raises(ValueError):
            RunConfig(**bad)


def test_gen_synthetic_small_and_deterministic():
    case, part = gen_synthetic(2, 2, 2, seed=0)
    assert len(case.lines) == 1 and part.owner == (0, 1)
    assert dumps_case(gen_synthetic(14, 3, 24, 7)[0]) == dumps_case(gen_synthetic(14, 3, 24, 7)[0])
    with pytest.raises(ValueError):
        gen_synthetic(2, 3, 2, 0)


def _connected(buses, pairs):
    adj = {b: set() for b in buses}
    for a, b in pairs:
        if a in adj and b in adj:
            adj[a].add(b)
            adj[b].add(a)
    seen, stack = set(), [next(iter(buses))]
    while stack:
        u = stack.pop()
        if u not in seen:
            seen.add(u)
            stack.extend(adj[u] - seen)
    return seen == set(buses)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 30), k=st.integers(1, 6), T=st.integers(1, 24), seed=st.integers(0, 2**31))
def test_gen_synthetic_properties(n, k, T, seed):
    k = min(k, n)
    case, part = gen_synthetic(n, k, T, seed)
    assert validate_case(case) == []
    assert case.total_capacity() >= 1.3 * float(case.total_demand().max())
    pairs = [ln.key for ln in case.lines]
    assert _connected(case.buses, pairs)
    for r in range(k):
        assert _connected(part.buses_of(r), pairs)
