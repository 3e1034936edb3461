"""Regional unit-commitment subproblem.

A :class:`RegionModel` lays out the decision variables of one region and
assembles the constraint matrices once; only the linear objective term and the
constant depend on the consensus state, so re-solving across iterations costs
one vector update.

Variable blocks, each of length ``T`` per entity, in this order::

    x[g]  commitment           y[g]  dispatch
    su[g] start-up indicator   sd[g] shut-down indicator
    theta[b] for b in owned + foreign buses (ascending id)
    f[l] for each tie line     p     regional production
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .case_model import RegionView
from .consensus import ConsensusState
from .mip import MIQPProblem
from .qp import QPProblem

REGULARIZATION = 1e-9


class SubproblemError(ValueError):
    pass


@dataclass
class LocalSolution:
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    flow: np.ndarray
    pi_up: np.ndarray
    pi_down: np.ndarray
    p: np.ndarray
    obj_augmented: float
    obj_true: float
    buses: tuple = ()
    vector: Optional[np.ndarray] = None

    def theta_of(self, bus: int) -> np.ndarray:
        return self.theta[self.buses.index(bus)]


def variable_count(view: RegionView) -> int:
    """Closed form: ``T * (4|G| + |I u U u V| + |ties| + 1)``."""
    return view.horizon * (4 * len(view.generators) + len(view.local_buses) + len(view.tie_lines) + 1)


class _Rows:
    def __init__(self, n):
        self.n = n
        self.r, self.c, self.v, self.rhs = [], [], [], []

    def add(self, coeffs, rhs):
        row = len(self.rhs)
        for col, val in coeffs:
            self.r.append(row)
            self.c.append(col)
            self.v.append(val)
        self.rhs.append(rhs)

    def build(self):
        m = len(self.rhs)
        mat = sp.csc_matrix((self.v, (self.r, self.c)), shape=(m, self.n))
        return mat, np.array(self.rhs, dtype=float)


class RegionModel:
    """Static structure of a region's augmented subproblem."""

    def __init__(self, view: RegionView, rho_theta=2.0, rho_f=2.0, rho_p=2.0, penalties=True):
        self.view = view
        self.rho_theta = float(rho_theta)
        self.rho_f = float(rho_f)
        self.rho_p = float(rho_p)
        self.penalties = penalties
        T = view.horizon
        self.T = T
        self.gens = view.generators
        self.buses = view.local_buses
        self.bus_pos = {b: i for i, b in enumerate(self.buses)}
        self.ties = view.tie_lines
        G, B, L = len(self.gens), len(self.buses), len(self.ties)
        self.off_x = 0
        self.off_y = G * T
        self.off_su = 2 * G * T
        self.off_sd = 3 * G * T
        self.off_theta = 4 * G * T
        self.off_f = self.off_theta + B * T
        self.off_p = self.off_f + L * T
        self.n = self.off_p + T
        assert self.n == variable_count(view)
        self.channels = view.channels
        self._build_static()

    # index helpers
    def ix(self, g, t):
        return self.off_x + g * self.T + t

    def iy(self, g, t):
        return self.off_y + g * self.T + t

    def isu(self, g, t):
        return self.off_su + g * self.T + t

    def isd(self, g, t):
        return self.off_sd + g * self.T + t

    def itheta(self, bus, t):
        return self.off_theta + self.bus_pos[bus] * self.T + t

    def iflow(self, l, t):
        return self.off_f + l * self.T + t

    def ip(self, t):
        return self.off_p + t

    @property
    def binary_indices(self) -> np.ndarray:
        return np.arange(self.off_x, self.off_y)

    def _build_static(self):
        view, T, n = self.view, self.T, self.n
        eq, ineq = _Rows(n), _Rows(n)
        lower = np.full(n, -np.inf)
        upper = np.full(n, np.inf)
        owned = view.owned
        demand = {b: view.demand[i] for i, b in enumerate(owned)}

        for gi, g in enumerate(self.gens):
            for t in range(T):
                x, y, su, sd = self.ix(gi, t), self.iy(gi, t), self.isu(gi, t), self.isd(gi, t)
                lower[[x, su, sd]] = 0.0
                upper[[x, su, sd]] = 1.0
                lower[y] = 0.0
                upper[y] = g.p_max
                # capacity bounds scaled by commitment
                ineq.add([(x, g.p_min), (y, -1.0)], 0.0)
                ineq.add([(y, 1.0), (x, -g.p_max)], 0.0)
                # start-up / shut-down indicators; units are off before t=0
                if t == 0:
                    ineq.add([(x, 1.0), (su, -1.0)], 0.0)
                else:
                    xp = self.ix(gi, t - 1)
                    ineq.add([(x, 1.0), (xp, -1.0), (su, -1.0)], 0.0)
                    ineq.add([(xp, 1.0), (x, -1.0), (sd, -1.0)], 0.0)
                    yp = self.iy(gi, t - 1)
                    ineq.add([(y, 1.0), (yp, -1.0)], g.ramp)
                    ineq.add([(yp, 1.0), (y, -1.0)], g.ramp)
                # minimum up / down windows clipped at the first period
                up_win = range(max(0, t - g.min_up + 1), t + 1)
                dn_win = range(max(0, t - g.min_down + 1), t + 1)
                ineq.add([(self.isu(gi, i), 1.0) for i in up_win] + [(x, -1.0)], 0.0)
                ineq.add([(x, 1.0)] + [(self.isd(gi, i), 1.0) for i in dn_win], 1.0)

        lines = sorted(view.local_lines + view.tie_lines, key=lambda ln: ln.key)
        owned_set = set(owned)
        for line in lines:
            u, v, gam = line.from_bus, line.to_bus, line.susceptance
            for t in range(T):
                coeffs = [(self.itheta(u, t), gam), (self.itheta(v, t), -gam)]
                ineq.add(coeffs, line.f_max)
                ineq.add([(c, -val) for c, val in coeffs], line.f_max)

        for li, line in enumerate(self.ties):
            u, v, gam = line.from_bus, line.to_bus, line.susceptance
            for t in range(T):
                eq.add([(self.iflow(li, t), 1.0), (self.itheta(u, t), -gam), (self.itheta(v, t), gam)], 0.0)

        gens_at = {b: [gi for gi, g in enumerate(self.gens) if g.bus == b] for b in owned}
        for b in owned:
            for t in range(T):
                coeffs = [(self.iy(gi, t), 1.0) for gi in gens_at[b]]
                for line in lines:
                    if b not in (line.from_bus, line.to_bus):
                        continue
                    other = line.other(b)
                    gam = line.susceptance
                    coeffs += [(self.itheta(b, t), -gam), (self.itheta(other, t), gam)]
                eq.add(coeffs, float(demand[b][t]))

        for t in range(T):
            eq.add([(self.iy(gi, t), 1.0) for gi in range(len(self.gens))] + [(self.ip(t), -1.0)], 0.0)

        if view.is_reference:
            for t in range(T):
                eq.add([(self.itheta(view.reference_bus, t), 1.0)], 0.0)

        self.eq_matrix, self.eq_rhs = eq.build()
        self.ineq_matrix, self.ineq_rhs = ineq.build()
        self.lower, self.upper = lower, upper
        assert owned_set <= set(self.buses)

        diag = np.zeros(n)
        if self.penalties:
            for b, _nb in self.channels:
                for t in range(T):
                    diag[self.itheta(b, t)] += self.rho_theta
            diag[self.off_f : self.off_p] += 2.0 * self.rho_f
            diag[self.off_p :] += self.rho_p
        diag[diag == 0.0] = REGULARIZATION
        self.quadratic = sp.diags(diag, format="csc")

        cost = np.zeros(n)
        for gi, g in enumerate(self.gens):
            cost[self.off_x + gi * T : self.off_x + (gi + 1) * T] = g.cost_commit
            cost[self.off_y + gi * T : self.off_y + (gi + 1) * T] = g.cost_dispatch
            cost[self.off_su + gi * T : self.off_su + (gi + 1) * T] = g.cost_startup
            cost[self.off_sd + gi * T : self.off_sd + (gi + 1) * T] = g.cost_shutdown
        self.cost = cost
        self.channel_theta_cols = np.array(
            [[self.itheta(b, t) for t in range(T)] for b, _ in self.channels], dtype=int
        ).reshape(len(self.channels), T)

    def _check(self, consensus: Optional[ConsensusState]):
        if consensus is None:
            if self.penalties:
                raise SubproblemError("consensus state required for an augmented subproblem")
            return
        if consensus.horizon != self.T:
            raise SubproblemError(f"horizon mismatch: consensus {consensus.horizon} vs view {self.T}")
        if tuple(consensus.channels) != tuple(self.channels):
            raise SubproblemError(f"region {self.view.region}: consensus channels do not match view")
        if tuple(l.key for l in consensus.ties) != tuple(l.key for l in self.ties):
            raise SubproblemError(f"region {self.view.region}: consensus tie lines do not match view")

    def objective_terms(self, consensus: Optional[ConsensusState]):
        """Linear term and constant of the augmented objective."""
        self._check(consensus)
        q = self.cost.copy()
        const = 0.0
        if consensus is None or not self.penalties:
            return q, const
        rt, rf, rp = self.rho_theta, self.rho_f, self.rho_p
        lin_theta = consensus.lam - rt * consensus.theta_bar
        np.add.at(q, self.channel_theta_cols.ravel(), lin_theta.ravel())
        const += float(np.sum(-consensus.lam * consensus.theta_bar + 0.5 * rt * consensus.theta_bar**2))
        if len(self.ties):
            q[self.off_f : self.off_p] += (consensus.phi - rf * consensus.f_bar - rf * consensus.f_tilde).ravel()
            const += float(
                np.sum(
                    -consensus.phi * consensus.f_bar
                    + 0.5 * rf * consensus.f_bar**2
                    + 0.5 * rf * consensus.f_tilde**2
                )
            )
        q[self.off_p :] += consensus.eta - rp * consensus.p_bar
        const += float(np.sum(-consensus.eta * consensus.p_bar + 0.5 * rp * consensus.p_bar**2))
        return q, const

    def qp(self, consensus: Optional[ConsensusState]) -> QPProblem:
        q, const = self.objective_terms(consensus)
        return QPProblem(
            self.n,
            self.quadratic,
            q,
            self.eq_matrix,
            self.eq_rhs,
            self.ineq_matrix,
            self.ineq_rhs,
            self.lower,
            self.upper,
            const,
        )

    def miqp(self, consensus: Optional[ConsensusState]) -> MIQPProblem:
        return MIQPProblem(self.qp(consensus), self.binary_indices)

    def decode(self, vec: np.ndarray, objective: float = float("nan")) -> LocalSolution:
        T, G, B, L = self.T, len(self.gens), len(self.buses), len(self.ties)
        vec = np.asarray(vec, dtype=float)
        sol = LocalSolution(
            x=vec[self.off_x : self.off_y].reshape(G, T).copy(),
            y=vec[self.off_y : self.off_su].reshape(G, T).copy(),
            pi_up=vec[self.off_su : self.off_sd].reshape(G, T).copy(),
            pi_down=vec[self.off_sd : self.off_theta].reshape(G, T).copy(),
            theta=vec[self.off_theta : self.off_f].reshape(B, T).copy(),
            flow=vec[self.off_f : self.off_p].reshape(L, T).copy(),
            p=vec[self.off_p :].copy(),
            obj_augmented=float(objective),
            obj_true=0.0,
            buses=self.buses,
            vector=vec.copy(),
        )
        sol.obj_true = true_cost(sol, self.view)
        return sol

    def augmented_value(self, sol: LocalSolution, consensus: ConsensusState) -> float:
        """Term-by-term evaluation of the augmented objective at ``sol``."""
        total = true_cost(sol, self.view)
        if consensus is None or not self.penalties:
            return total
        for i, (b, _nb) in enumerate(self.channels):
            d = sol.theta_of(b) - consensus.theta_bar[i]
            total += float(np.sum(consensus.lam[i] * d + 0.5 * self.rho_theta * d**2))
        for li in range(len(self.ties)):
            f = sol.flow[li]
            d1 = f - consensus.f_bar[li]
            d2 = f - consensus.f_tilde[li]
            total += float(np.sum(consensus.phi[li] * d1 + 0.5 * self.rho_f * (d1**2 + d2**2)))
        dp = sol.p - consensus.p_bar
        total += float(np.sum(consensus.eta * dp + 0.5 * self.rho_p * dp**2))
        return total


def _model(view: RegionView, config, penalties=True) -> RegionModel:
    return RegionModel(view, config.rho_theta, config.rho_f, config.rho_p, penalties=penalties)


def build_convex(view: RegionView, consensus: ConsensusState, config) -> QPProblem:
    """Relaxed augmented subproblem (commitments in [0, 1])."""
    return _model(view, config).qp(consensus)


def build_binary(view: RegionView, consensus: ConsensusState, config) -> MIQPProblem:
    """Same model with every commitment variable declared binary."""
    return _model(view, config).miqp(consensus)


def true_cost(sol: LocalSolution, view: RegionView) -> float:
    """Dispatch + commitment + start-up + shut-down cost; no penalty terms."""
    if not view.generators:
        return 0.0
    d = np.array([g.cost_dispatch for g in view.generators])[:, None]
    c = np.array([g.cost_commit for g in view.generators])[:, None]
    su = np.array([g.cost_startup for g in view.generators])[:, None]
    sd = np.array([g.cost_shutdown for g in view.generators])[:, None]
    return float(np.sum(d * sol.y + c * sol.x + su * sol.pi_up + sd * sol.pi_down))
