"""Small reference cases shared by the tests, the CLI and the docs."""

from __future__ import annotations

import numpy as np

from .case_io import gen_synthetic
from .case_model import Generator, Partition, PowerCase, TransmissionLine


def _unit(gid, bus, d, **kw):
    params = dict(
        p_min=1.0, p_max=10.0, cost_dispatch=d, cost_commit=1.0, cost_startup=1.0,
        cost_shutdown=1.0, min_up=1, min_down=1, ramp=10.0,
    )
    params.update(kw)
    return Generator(id=gid, bus=bus, **params)


def fixture_a():
    """Two buses, one tie line, one unit per region; optimum commits only g0."""
    case = PowerCase(
        buses=(0, 1),
        generators=(_unit(0, 0, 1.0), _unit(1, 1, 2.0)),
        lines=(TransmissionLine(0, 1, 10.0, 5.0),),
        demand=np.array([[2.0, 2.0], [3.0, 3.0]]),
        horizon=2,
    )
    return case, Partition((0, 1), 2)


def fixture_b():
    """Four-bus ring split into two regions of two buses, four periods."""
    case = PowerCase(
        buses=(0, 1, 2, 3),
        generators=(
            _unit(0, 0, 1.0, p_max=12.0, cost_startup=2.0, ramp=8.0),
            _unit(1, 2, 2.5, p_max=8.0, cost_commit=0.5, min_up=2),
            _unit(2, 3, 1.5, p_min=2.0, p_max=6.0, cost_startup=3.0, min_down=2, ramp=6.0),
        ),
        lines=(
            TransmissionLine(0, 1, 10.0, 8.0),
            TransmissionLine(1, 2, 8.0, 8.0),
            TransmissionLine(2, 3, 12.0, 8.0),
            TransmissionLine(0, 3, 9.0, 8.0),
        ),
        demand=np.array(
            [
                [1.0, 1.5, 2.0, 1.5],
                [3.0, 4.0, 5.0, 4.0],
                [0.5, 0.5, 1.0, 0.5],
                [2.0, 3.0, 4.0, 3.0],
            ]
        ),
        horizon=4,
    )
    return case, Partition((0, 0, 1, 1), 2)


def fixture_c():
    """Synthetic 14-bus, 3-region, 24-period case (seed 7)."""
    return gen_synthetic(14, 3, 24, seed=7)


FIXTURES = {"a": fixture_a, "b": fixture_b, "c": fixture_c}
