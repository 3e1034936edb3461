"""One region's iteration loop.

An iteration is split into the pieces a message-driven runtime needs:

``compute``        convergence test, phase switch, local solve, report
``receive_sums``   controller reply: forced phase advance and production target
``make_delta``     exchange tuple for a partner
``apply_delta``    pairwise angle/flow updates from a partner's tuple
``finish``         production dual update and iteration counter

:func:`step` chains them for callers that already hold the reply and the
partner's tuple.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .case_model import RegionView
from .consensus import (
    EXCHANGE_RULES,
    ConsensusState,
    neighbor_flow_estimate,
    production_stats,
    production_target,
    update_eta,
)
from .controller import ControllerReply, RegionReport
from .mip import solve_miqp
from .qp import OPTIMAL, solve_qp
from .subproblem import LocalSolution, RegionModel

logger = logging.getLogger(__name__)

CONVEX = 0
BINARY = 1


class SubproblemInfeasible(RuntimeError):
    def __init__(self, region, k, detail=""):
        super().__init__(f"region {region} iteration {k}: subproblem infeasible {detail}".rstrip())
        self.region = region
        self.k = k


class ProtocolOrderError(RuntimeError):
    pass


@dataclass(frozen=True)
class DeltaTuple:
    """Angles and duals on the buses shared by ``sender`` and ``receiver``, and
    flow duals on the tie lines joining them. Keys are bus ids / line keys,
    values are length-``T`` tuples."""

    sender: int
    receiver: int
    thetas: Dict[int, Tuple[float, ...]]
    lambdas: Dict[int, Tuple[float, ...]]
    phis: Dict[Tuple[int, int], Tuple[float, ...]]

    def to_json(self) -> dict:
        return {
            "sender": self.sender,
            "receiver": self.receiver,
            "thetas": {str(b): list(v) for b, v in self.thetas.items()},
            "lambdas": {str(b): list(v) for b, v in self.lambdas.items()},
            "phis": {f"{k[0]}-{k[1]}": list(v) for k, v in self.phis.items()},
        }


def check_local_convergence(theta_k, theta_tilde_k, theta_tilde_prev, alpha, beta) -> int:
    """1 when own and received angles agree within ``alpha`` and the received
    angles moved less than ``beta`` since the previous exchange (max-norms)."""
    if theta_tilde_prev is None:
        return 0
    theta_k = np.asarray(theta_k, dtype=float)
    a = np.max(np.abs(theta_k - np.asarray(theta_tilde_k)), initial=0.0)
    b = np.max(np.abs(np.asarray(theta_tilde_k) - np.asarray(theta_tilde_prev)), initial=0.0)
    return int(a < alpha and b < beta)


def maybe_switch_phase(xi_history, zeta: int, kappa: int) -> int:
    if kappa == BINARY:
        return BINARY
    window = list(xi_history)[-(zeta + 1):]
    if len(window) == zeta + 1 and all(v == 1 for v in window):
        return BINARY
    return CONVEX


@dataclass
class Clock:
    compute_ms: float = 0.0
    comm_ms: float = 0.0
    idle_ms: float = 0.0


class Agent:
    """IBAD-UC state machine for one region.

    ``interleaved=False`` disables the local streak-based phase switch and
    ``fixed_mu`` pins the production-target multiplier; together they give
    the synchronous baseline.
    """

    def __init__(
        self,
        view: RegionView,
        config,
        region_count: int,
        interleaved: bool = True,
        fixed_mu: Optional[float] = None,
    ):
        self.view = view
        self.region = view.region
        self.config = config
        self.region_count = region_count
        self.interleaved = interleaved
        self.fixed_mu = fixed_mu
        self.phase_rule, self.flow_rule = EXCHANGE_RULES[getattr(config, "exchange", "literal")]
        self.model = RegionModel(view, config.rho_theta, config.rho_f, config.rho_p)
        self.consensus = ConsensusState.for_view(view)
        self.k = 0
        self.kappa = CONVEX
        self.xi = 0
        self.xi_history: List[int] = []
        self.last: Optional[LocalSolution] = None
        self.binary_history: List[np.ndarray] = []
        self.converged = False
        self.clock = Clock()
        self.stats = None
        self.mu = np.zeros(view.horizon)
        self.last_solve_ms = 0.0
        self.last_kkt = 0.0
        self.kkt_history: List[float] = []
        self._awaiting: Optional[int] = None
        self._phase = "idle"

    # -- iteration pieces ---------------------------------------------------
    def own_channel_thetas(self) -> np.ndarray:
        if self.last is None:
            return np.zeros_like(self.consensus.theta_recv)
        return self.last.vector[self.model.channel_theta_cols]

    def local_convergence(self) -> int:
        c = self.consensus
        if self.last is None or self.k == 0:
            return 0
        if c.channels and not (np.all(c.received) and np.all(c.received_prev)):
            return 0
        xi = check_local_convergence(
            self.own_channel_thetas(), c.theta_recv, c.theta_recv_prev, self.config.alpha, self.config.beta
        )
        if xi and self.kappa == BINARY:
            hist = self.binary_history
            if len(hist) < 2 or not np.array_equal(hist[-1], hist[-2]):
                xi = 0
        return xi

    def compute(self) -> RegionReport:
        if self._phase not in ("idle",):
            raise ProtocolOrderError(f"region {self.region}: compute() while {self._phase}")
        self.xi = self.local_convergence()
        self.xi_history.append(self.xi)
        if self.interleaved:
            self.kappa = maybe_switch_phase(self.xi_history, self.config.zeta, self.kappa)

        started = time.perf_counter()
        self.last = self._solve()
        self.last_solve_ms = 1000.0 * (time.perf_counter() - started)

        self.stats = production_stats(self.view, self.last.y)
        self._phase = "reported"
        return RegionReport(
            self.region,
            tuple(float(v) for v in self.stats.psi),
            tuple(float(v) for v in self.stats.s),
            int(self.xi),
            int(self.kappa),
        )

    def _solve(self) -> LocalSolution:
        cfg = self.config
        if self.kappa == CONVEX:
            sol = solve_qp(self.model.qp(self.consensus), tol=cfg.qp_tol)
            if sol.status == "infeasible":
                raise SubproblemInfeasible(self.region, self.k, f"(certificate {sol.infeasibility:.3g})")
            if sol.status != OPTIMAL:
                logger.warning("region %d k=%d: QP status %s (kkt %.3g)", self.region, self.k, sol.status, sol.kkt_residual)
            self.last_kkt = sol.kkt_residual
            self.kkt_history.append(sol.kkt_residual)
            return self.model.decode(sol.x, sol.objective)

        hint = None
        if self.binary_history:
            hint = self.binary_history[-1].ravel()
        elif self.last is not None:
            hint = np.ceil(self.last.x.ravel() - 1e-6)
        sol = solve_miqp(
            self.model.miqp(self.consensus),
            mip_gap=cfg.mip_gap,
            node_limit=cfg.node_limit,
            qp_tol=cfg.qp_tol,
            incumbent_hint=hint,
        )
        if sol.x is None:
            raise SubproblemInfeasible(self.region, self.k, f"(branch-and-bound status {sol.status})")
        self.last_kkt = sol.max_kkt
        self.kkt_history.append(sol.max_kkt)
        local = self.model.decode(sol.x, sol.objective)
        local.x = np.round(local.x)
        self.binary_history.append(local.x.copy())
        del self.binary_history[:-2]
        return local

    def receive_sums(self, reply: ControllerReply) -> None:
        if self._phase != "reported":
            raise ProtocolOrderError(f"region {self.region}: reply received while {self._phase}")
        c = self.consensus
        c.sum_psi = np.asarray(reply.sum_psi, dtype=float)
        c.sum_s = np.asarray(reply.sum_s, dtype=float)
        if reply.sum_xi == self.region_count:
            if self.kappa == BINARY:
                self.converged = True
            else:
                self.kappa = BINARY
        y_total = self.last.y.sum(axis=0)
        if self.fixed_mu is not None:
            self.mu = np.full(self.view.horizon, self.fixed_mu)
            c.p_bar = y_total + self.mu * c.sum_psi
        else:
            self.mu, c.p_bar = production_target(y_total, self.stats.s, c.sum_psi, c.sum_s)
        self._awaiting = reply.partner
        self._phase = "exchanging"

    def make_delta(self, partner: int) -> DeltaTuple:
        if self._phase != "exchanging":
            raise ProtocolOrderError(f"region {self.region}: make_delta() while {self._phase}")
        c = self.consensus
        thetas, lambdas = {}, {}
        for b in self.view.shared_buses.get(partner, ()):
            i = c.channel_index[(b, partner)]
            thetas[b] = tuple(float(v) for v in self.last.theta_of(b))
            lambdas[b] = tuple(float(v) for v in c.lam[i])
        phis = {}
        for line in self.view.ties_with(partner):
            phis[line.key] = tuple(float(v) for v in c.phi[c.tie_index[line.key]])
        return DeltaTuple(self.region, partner, thetas, lambdas, phis)

    def apply_delta(self, delta: DeltaTuple) -> None:
        if self._phase != "exchanging":
            raise ProtocolOrderError(f"region {self.region}: apply_delta() while {self._phase}")
        if delta.receiver != self.region:
            raise ProtocolOrderError(f"delta for region {delta.receiver} delivered to {self.region}")
        c = self.consensus
        nb = delta.sender
        rho_t, rho_f = self.config.rho_theta, self.config.rho_f
        for b in self.view.shared_buses.get(nb, ()):
            if b not in delta.thetas:
                raise ProtocolOrderError(f"delta from {nb} lacks angle of bus {b}")
            i = c.channel_index[(b, nb)]
            theta_t = np.asarray(delta.thetas[b])
            lam_t = np.asarray(delta.lambdas[b])
            lam_new, theta_bar = self.phase_rule(self.last.theta_of(b), c.lam[i], theta_t, lam_t, rho_t)
            c.lam[i] = lam_new
            c.theta_bar[i] = theta_bar
            c.theta_recv_prev[i] = c.theta_recv[i]
            c.received_prev[i] = c.received[i]
            c.theta_recv[i] = theta_t
            c.lam_recv[i] = lam_t
            c.received[i] = True
        for line in self.view.ties_with(nb):
            li = c.tie_index[line.key]
            f_tilde = neighbor_flow_estimate(
                np.asarray(delta.thetas[line.from_bus]), np.asarray(delta.thetas[line.to_bus]), line
            )
            phi_t = np.asarray(delta.phis[line.key])
            phi_new, f_bar = self.flow_rule(self.last.flow[li], c.phi[li], f_tilde, phi_t, rho_f)
            c.phi[li] = phi_new
            c.f_bar[li] = f_bar
            c.f_tilde[li] = f_tilde
            c.phi_recv[li] = phi_t

    def finish(self) -> None:
        if self._phase != "exchanging":
            raise ProtocolOrderError(f"region {self.region}: finish() while {self._phase}")
        c = self.consensus
        c.eta = update_eta(c.eta, self.config.rho_p, self.last.p, c.p_bar)
        self.k += 1
        self._awaiting = None
        self._phase = "idle"

    # -- helpers ------------------------------------------------------------
    @property
    def partner(self) -> Optional[int]:
        return self._awaiting

    def trace_record(self, solve_ms: Optional[float] = None) -> dict:
        return {
            "region": self.region,
            "k": self.k,
            "kappa": int(self.kappa),
            "xi": int(self.xi),
            "obj_true": self.last.obj_true,
            "obj_augmented": self.last.obj_augmented,
            "solve_ms": self.last_solve_ms if solve_ms is None else solve_ms,
            "residuals": {"kkt": self.last_kkt, **self.residuals()},
        }

    def residuals(self) -> dict:
        c = self.consensus
        if not c.channels or self.last is None:
            return {"theta_gap": 0.0, "theta_move": 0.0}
        return {
            "theta_gap": float(np.max(np.abs(self.own_channel_thetas() - c.theta_recv))),
            "theta_move": float(np.max(np.abs(c.theta_recv - c.theta_recv_prev))),
        }


def step(agent: Agent, reply: ControllerReply, delta_in: Optional[DeltaTuple]):
    """One full iteration with the reply and partner tuple supplied up front.

    Returns ``(agent, report, delta_out)``; ``delta_out`` is ``None`` when the
    reply names no partner.
    """
    report = agent.compute()
    agent.receive_sums(reply)
    delta_out = None
    if reply.partner is not None:
        delta_out = agent.make_delta(reply.partner)
        if delta_in is None or delta_in.sender != reply.partner:
            raise ProtocolOrderError("delta_in must come from the partner named in the reply")
        agent.apply_delta(delta_in)
    agent.finish()
    return agent, report, delta_out
