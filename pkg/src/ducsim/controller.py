"""Coordinator that pairs neighbouring regions and keeps running global sums.

The controller never sees network or generator data: its state and messages
carry only production differences, residual-cost statistics and flags.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class RegionReport:
    region: int
    psi: Tuple[float, ...]
    s: Tuple[float, ...]
    xi: int
    kappa: int

    def to_json(self) -> dict:
        return {"region": self.region, "psi": list(self.psi), "s": list(self.s), "xi": self.xi, "kappa": self.kappa}


@dataclass(frozen=True)
class ControllerReply:
    sum_psi: Tuple[float, ...]
    sum_s: Tuple[float, ...]
    sum_xi: int
    partner: Optional[int]

    def to_json(self) -> dict:
        return {"sum_psi": list(self.sum_psi), "sum_s": list(self.sum_s), "sum_xi": self.sum_xi, "partner": self.partner}


@dataclass
class ControllerState:
    region_count: int
    horizon: int
    psi_tilde: np.ndarray = None
    s_tilde: np.ndarray = None
    xi: np.ndarray = None
    kappa: np.ndarray = None
    pending: List[int] = field(default_factory=list)
    gc: bool = False

    def __post_init__(self):
        R, T = self.region_count, self.horizon
        if self.psi_tilde is None:
            self.psi_tilde = np.zeros((R, T))
        if self.s_tilde is None:
            self.s_tilde = np.zeros((R, T))
        if self.xi is None:
            self.xi = np.zeros(R, dtype=int)
        if self.kappa is None:
            self.kappa = np.zeros(R, dtype=int)


def _reply(state: ControllerState, partner: Optional[int]) -> ControllerReply:
    return ControllerReply(
        tuple(float(v) for v in state.psi_tilde.sum(axis=0)),
        tuple(float(v) for v in state.s_tilde.sum(axis=0)),
        int(state.xi.sum()),
        partner,
    )


def on_report(
    state: ControllerState, report: RegionReport, neighbors: Dict[int, Sequence[int]]
) -> List[Tuple[int, ControllerReply]]:
    """Record ``report`` and try to match its region with a waiting neighbour.

    Returns the replies to send, as ``(recipient, reply)`` pairs: two when a
    match is made, none when the region has to wait. A region without any
    neighbour is answered immediately with ``partner=None``.
    """
    r1 = report.region
    if r1 in state.pending:
        raise ProtocolError(f"region {r1} reported while already waiting for a match")
    if len(report.psi) != state.horizon or len(report.s) != state.horizon:
        raise ProtocolError(f"region {r1}: report not dimensioned to T={state.horizon}")
    state.psi_tilde[r1] = report.psi
    state.s_tilde[r1] = report.s
    state.xi[r1] = int(report.xi)
    state.kappa[r1] = int(report.kappa)

    nbrs = set(neighbors.get(r1, ()))
    if not nbrs:
        return [(r1, _reply(state, None))]
    # pending is in arrival order, so the first hit has waited longest
    r2 = next((r for r in state.pending if r in nbrs), None)
    if r2 is None:
        state.pending.append(r1)
        return []
    state.pending.remove(r2)
    return [(r1, _reply(state, r2)), (r2, _reply(state, r1))]


def check_gc(state: ControllerState) -> bool:
    state.gc = bool(np.all(state.xi == 1) and np.all(state.kappa == 1))
    return state.gc
