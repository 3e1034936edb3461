import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ducsim.case_io import gen_synthetic
from ducsim.case_model import (
    Generator, Partition, PartitionError, PowerCase, TransmissionLine,
    classify_all, classify_region, validate_case,
)
from oracles import brute_force_sets


def test_fixture_a_classification(fx_a):
    case, part = fx_a
    v = classify_region(case, part, 0)
    assert v.internal == ()
    assert v.boundary == (0,)
    assert v.foreign == (1,)
    assert v.neighbors == (1,)
    assert v.is_reference and v.reference_bus == 0
    assert not classify_region(case, part, 1).is_reference


def test_path_classification():
    case = PowerCase(
        (0, 1, 2), (), (TransmissionLine(0, 1, 1.0, 1.0), TransmissionLine(1, 2, 1.0, 1.0)),
        np.zeros((3, 1)), 1,
    )
    v = classify_region(case, Partition((0, 0, 1), 2), 0)
    assert (v.internal, v.boundary, v.foreign) == ((0,), (1,), (2,))
    assert [ln.key for ln in v.local_lines] == [(0, 1)]
    assert [ln.key for ln in v.tie_lines] == [(1, 2)]


def test_fixture_c_against_brute_force(fx_c):
    case, part = fx_c
    for r in range(part.region_count):
        v = classify_region(case, part, r)
        internal, boundary, foreign = brute_force_sets(case, part.owner, r)
        assert set(v.internal) == internal
        assert set(v.boundary) == boundary
        assert set(v.foreign) == foreign
        assert len(v.internal) + len(v.boundary) == len(part.buses_of(r))
        for b in v.boundary:
            assert any(b in (ln.from_bus, ln.to_bus) for ln in v.tie_lines)


def test_validate_fixture_a_clean(fx_a):
    assert validate_case(fx_a[0]) == []


def test_validate_p_min_above_p_max(fx_a):
    case, _ = fx_a
    g0 = case.generators[0]
    bad = case.replace(generators=(Generator(**{**g0.__dict__, "p_min": 11.0}), case.generators[1]))
    problems = validate_case(bad)
    assert len(problems) == 1
    assert "g0" in problems[0] and "p_min>p_max" in problems[0]


def test_validate_duplicate_line(fx_a):
    case, _ = fx_a
    bad = case.replace(lines=case.lines + (TransmissionLine(1, 0, 3.0, 2.0),))
    problems = validate_case(bad)
    assert any("(0, 1)" in p and "duplicate" in p for p in problems)


@pytest.mark.parametrize(
    "change, needle",
    [
        (dict(demand=-np.ones((2, 2))), "demand"),
        (dict(horizon=3), "demand: expected shape"),
        (dict(lines=(TransmissionLine(0, 0, 1.0, 1.0),)), "from_bus == to_bus"),
        (dict(lines=(TransmissionLine(0, 1, 0.0, 1.0),)), "susceptance"),
        (dict(lines=(TransmissionLine(0, 7, 1.0, 1.0),)), "endpoint 7"),
    ],
)
def test_validate_other_violations(fx_a, change, needle):
    problems = validate_case(fx_a[0].replace(**change))
    assert any(needle in p for p in problems), problems


def test_unknown_region_and_mismatch(fx_a):
    case, part = fx_a
    with pytest.raises(PartitionError):
        classify_region(case, part, 2)
    with pytest.raises(PartitionError):
        classify_region(case, Partition((0,), 1), 0)


def test_classify_is_pure(fx_b):
    case, part = fx_b
    a, b = classify_region(case, part, 1), classify_region(case, part, 1)
    assert a.internal == b.internal and a.channels == b.channels
    assert np.array_equal(a.demand, b.demand)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 16), k=st.integers(1, 4), seed=st.integers(0, 10_000))
def test_partition_properties(n, k, seed):
    k = min(k, n)
    case, part = gen_synthetic(n, k, 2, seed)
    views = classify_all(case, part)
    owned = [b for v in views for b in v.internal + v.boundary]
    assert sorted(owned) == list(case.buses)
    for v in views:
        assert not set(v.internal) & set(v.boundary)
        assert not set(v.foreign) & set(v.owned)
        assert set(v.foreign) == {ln.other(b) for ln in v.tie_lines for b in (ln.from_bus, ln.to_bus) if b in v.owned}
        assert set(v.neighbors) == {part.owner[b] for b in v.foreign}
        for b in v.foreign:
            assert b in views[part.owner[b]].boundary
    for ln in case.lines:
        holders = [v.region for v in views if ln in v.tie_lines]
        ends = {part.owner[ln.from_bus], part.owner[ln.to_bus]}
        if len(ends) == 2:
            assert sorted(holders) == sorted(ends)
        else:
            assert holders == []
