"""Pairwise consensus exchange and the production-target mechanism.

All functions are elementwise over numpy arrays (or plain floats), so a whole
horizon, or a block of channels by horizon, is updated in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from .case_model import RegionView, TransmissionLine

DIV_GUARD = 1e-12


def update_phase(theta, lam, theta_tilde, lam_tilde, rho_theta):
    """Intermediate phase angle for one exchange.

    Returns ``(lam_new, theta_bar)``. ``theta_bar`` is formed with the dual
    held *before* this exchange; the caller then replaces its dual with
    ``lam_new``.
    """
    lam_hat = -0.5 * (lam + lam_tilde) + 0.5 * rho_theta * (theta - theta_tilde)
    theta_bar = (lam_hat + lam) / rho_theta + theta_tilde
    return lam_hat, theta_bar


def update_flow(f, phi, f_tilde, phi_tilde, rho_f):
    """Intermediate tie-line flow; same algebra as :func:`update_phase`."""
    phi_hat = -0.5 * (phi + phi_tilde) + 0.5 * rho_f * (f - f_tilde)
    f_bar = (phi_hat + phi) / rho_f + f_tilde
    return phi_hat, f_bar


def pair_update(value, dual, value_tilde, dual_tilde, rho):
    """Sign-consistent pairwise exchange.

    The two sides of a channel hold duals of opposite sign (``dual_tilde`` is
    the neighbour's own dual, not negated). Returns ``(dual_new, target)``
    where the target is the midpoint shifted by the dual imbalance and the
    dual integrates half the disagreement. Agreement with ``dual = -dual_tilde``
    is a fixed point.
    """
    dual_new = 0.5 * (dual - dual_tilde) + 0.5 * rho * (value - value_tilde)
    target = 0.5 * (value + value_tilde) + (dual + dual_tilde) / (2.0 * rho)
    return dual_new, target


EXCHANGE_RULES = {
    "literal": (update_phase, update_flow),
    "consensus": (pair_update, pair_update),
}


def neighbor_flow_estimate(theta_u, theta_v, line: TransmissionLine, u: int = None, v: int = None):
    """Flow on ``line`` implied by a neighbour's angles, in canonical direction.

    ``theta_u``/``theta_v`` are the angles at buses ``u`` and ``v``; when the
    bus ids are omitted they are taken as ``line.from_bus``/``line.to_bus``.
    """
    if theta_u is None or theta_v is None:
        raise KeyError("neighbor_flow_estimate: missing endpoint angle")
    if u is None:
        u, v = line.from_bus, line.to_bus
    if {u, v} != {line.from_bus, line.to_bus}:
        raise ValueError(f"buses ({u},{v}) are not the endpoints of line {line.key}")
    sign = 1.0 if u == line.from_bus else -1.0
    return sign * line.susceptance * (np.asarray(theta_u) - np.asarray(theta_v))


@dataclass
class ProductionStats:
    psi: np.ndarray
    s: np.ndarray
    mu: np.ndarray = None


def production_stats(view: RegionView, y: np.ndarray, delta=None) -> ProductionStats:
    """Local production difference and inverse average residual cost.

    ``y`` is the dispatch matrix, one row per generator of ``view`` (ascending
    id), one column per period. ``delta`` overrides the owned demand rows.
    """
    y = np.asarray(y, dtype=float).reshape(len(view.generators), view.horizon)
    if delta is None:
        demand = view.owned_demand()
    else:
        demand = np.asarray(delta, dtype=float).reshape(-1, view.horizon).sum(axis=0)
    psi = demand - y.sum(axis=0)
    if not view.generators:
        return ProductionStats(psi, np.zeros(view.horizon))
    p_max = np.array([g.p_max for g in view.generators])[:, None]
    d = np.array([g.cost_dispatch for g in view.generators])[:, None]
    headroom = p_max - y
    num = headroom.sum(axis=0)
    den = (d * headroom).sum(axis=0)
    s = np.where(np.abs(den) < DIV_GUARD, 0.0, num / np.where(np.abs(den) < DIV_GUARD, 1.0, den))
    return ProductionStats(psi, np.maximum(s, 0.0))


def production_target(y_total, s_local, sum_psi, sum_s):
    """Multiplier and production target.

    ``y_total`` is the region's total dispatch per period. Returns ``(mu, p_bar)``.
    """
    s_local = np.asarray(s_local, dtype=float)
    sum_s = np.asarray(sum_s, dtype=float)
    safe = np.where(sum_s < DIV_GUARD, 1.0, sum_s)
    mu = np.where(sum_s < DIV_GUARD, 0.0, s_local / safe)
    p_bar = np.asarray(y_total, dtype=float) + mu * np.asarray(sum_psi, dtype=float)
    return mu, p_bar


def update_eta(eta, rho_p, p, p_bar):
    return eta + rho_p * (np.asarray(p) - np.asarray(p_bar))


@dataclass
class ConsensusState:
    """Exchange state held privately by one region.

    Angle quantities are stored per channel (bus, neighbour) as rows of a
    ``(n_channels, T)`` array; flow quantities per tie line.
    """

    channels: Tuple[Tuple[int, int], ...]
    ties: Tuple[TransmissionLine, ...]
    horizon: int
    theta_bar: np.ndarray = None
    lam: np.ndarray = None
    theta_recv: np.ndarray = None
    lam_recv: np.ndarray = None
    theta_recv_prev: np.ndarray = None
    received: np.ndarray = None
    received_prev: np.ndarray = None
    f_bar: np.ndarray = None
    phi: np.ndarray = None
    f_tilde: np.ndarray = None
    phi_recv: np.ndarray = None
    p_bar: np.ndarray = None
    eta: np.ndarray = None
    sum_psi: np.ndarray = None
    sum_s: np.ndarray = None
    channel_index: Dict[Tuple[int, int], int] = field(default_factory=dict)
    tie_index: Dict[Tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        c, n_ties, T = len(self.channels), len(self.ties), self.horizon
        for name in ("theta_bar", "lam", "theta_recv", "lam_recv", "theta_recv_prev"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros((c, T)))
        if self.received is None:
            self.received = np.zeros(c, dtype=bool)
        if self.received_prev is None:
            self.received_prev = np.zeros(c, dtype=bool)
        for name in ("f_bar", "phi", "f_tilde", "phi_recv"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros((n_ties, T)))
        for name in ("p_bar", "eta", "sum_psi", "sum_s"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(T))
        self.channel_index = {ch: i for i, ch in enumerate(self.channels)}
        self.tie_index = {line.key: i for i, line in enumerate(self.ties)}

    @classmethod
    def for_view(cls, view: RegionView) -> "ConsensusState":
        return cls(view.channels, view.tie_lines, view.horizon)

    def copy(self) -> "ConsensusState":
        out = ConsensusState(self.channels, self.ties, self.horizon)
        for name in (
            "theta_bar", "lam", "theta_recv", "lam_recv", "theta_recv_prev", "received",
            "received_prev", "f_bar", "phi", "f_tilde", "phi_recv", "p_bar", "eta", "sum_psi", "sum_s",
        ):
            setattr(out, name, getattr(self, name).copy())
        return out
