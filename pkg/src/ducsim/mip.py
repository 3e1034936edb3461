"""Best-first branch-and-bound over binary variables on top of :mod:`ducsim.qp`.

Branching picks the most fractional binary (lowest index on ties); the down
child (fixed to 0) is created before the up child, and open nodes are ordered by
relaxation bound, then node id. Identical inputs give identical node traces.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .qp import OPTIMAL, QPProblem, QPSolution, solve_qp

logger = logging.getLogger(__name__)

INTEGRALITY_TOL = 1e-6


class InfeasibleError(RuntimeError):
    pass


@dataclass
class MIQPProblem:
    base: QPProblem
    binary_vars: np.ndarray

    def __post_init__(self):
        self.binary_vars = np.asarray(self.binary_vars, dtype=int).reshape(-1)
        if self.binary_vars.size and (self.binary_vars.min() < 0 or self.binary_vars.max() >= self.base.n):
            raise ValueError("binary variable index out of range")
        lo = self.base.lower[self.binary_vars]
        hi = self.base.upper[self.binary_vars]
        if np.any(lo < 0) or np.any(hi > 1):
            raise ValueError("bounds of binary variables must lie within [0, 1]")


@dataclass
class MIQPSolution:
    x: Optional[np.ndarray]
    objective: float
    lower_bound: float
    gap: float
    status: str
    nodes: int = 0
    branchings: int = 0
    trace: List[tuple] = field(default_factory=list)
    relaxation: Optional[QPSolution] = None
    max_kkt: float = 0.0


def relative_gap(objective: float, lower_bound: float) -> float:
    return (objective - lower_bound) / max(abs(lower_bound), 1.0)


def _fractionality(values: np.ndarray) -> np.ndarray:
    return np.minimum(values - np.floor(values), np.ceil(values) - values)


def solve_miqp(
    problem: MIQPProblem,
    mip_gap: float = 1e-3,
    node_limit: int = 10000,
    qp_tol: float = 1e-6,
    incumbent_hint: Optional[Sequence[float]] = None,
) -> MIQPSolution:
    """Branch-and-bound.

    ``incumbent_hint`` optionally gives values for the binaries; if fixing them
    yields a feasible point it seeds the incumbent before the search starts.

    Returns status ``"optimal"`` (gap within ``mip_gap``), ``"infeasible"`` or
    ``"node_limit"``.
    """
    base = problem.base
    bins = problem.binary_vars
    trace: List[tuple] = []
    max_kkt = 0.0

    def relax(lower, upper):
        nonlocal max_kkt
        sol = solve_qp(base.with_bounds(lower, upper), tol=qp_tol)
        if sol.status == OPTIMAL:
            max_kkt = max(max_kkt, sol.kkt_residual)
        return sol

    def fix_and_solve(values):
        lo, hi = base.lower.copy(), base.upper.copy()
        lo[bins] = values
        hi[bins] = values
        return relax(lo, hi)

    inc_x, inc_obj = None, np.inf
    if incumbent_hint is not None and bins.size:
        hint = np.clip(np.round(np.asarray(incumbent_hint, dtype=float)), base.lower[bins], base.upper[bins])
        sol = fix_and_solve(hint)
        if sol.status == OPTIMAL:
            inc_x, inc_obj = sol.x, sol.objective

    root = relax(base.lower, base.upper)
    if root.status == "infeasible":
        return MIQPSolution(None, np.inf, np.inf, np.inf, "infeasible", nodes=1, relaxation=root)

    counter = 0
    heap = [(root.objective, 0, base.lower, base.upper, root)]
    nodes = 1
    branchings = 0
    lower_bound = root.objective
    status = "optimal"
    while heap:
        bound, node_id, lo, hi, sol = heapq.heappop(heap)
        lower_bound = max(lower_bound, min(bound, inc_obj))
        trace.append((node_id, bound, lower_bound, inc_obj))
        if inc_x is not None and relative_gap(inc_obj, lower_bound) <= mip_gap:
            heapq.heappush(heap, (bound, node_id, lo, hi, sol))
            break
        if bound >= inc_obj:
            continue
        vals = sol.x[bins]
        frac = _fractionality(vals)
        if frac.max(initial=0.0) <= INTEGRALITY_TOL:
            fixed = fix_and_solve(np.round(vals))
            cand = fixed if fixed.status == OPTIMAL else sol
            if cand.objective < inc_obj:
                inc_x, inc_obj = cand.x.copy(), cand.objective
                if fixed.status != OPTIMAL:
                    inc_x[bins] = np.round(vals)
            continue
        if nodes >= node_limit:
            status = "node_limit"
            heapq.heappush(heap, (bound, node_id, lo, hi, sol))
            break
        j = int(np.argmax(frac))  # argmax returns the first, i.e. lowest index, on ties
        var = bins[j]
        branchings += 1
        for side in (0.0, 1.0):
            clo, chi = lo.copy(), hi.copy()
            clo[var] = side
            chi[var] = side
            counter += 1
            nodes += 1
            child = relax(clo, chi)
            if child.status == "infeasible":
                continue
            if not np.isfinite(child.objective):
                continue
            # a child relaxation cannot beat its parent; guard against solver noise
            cbound = max(child.objective, bound)
            if cbound < inc_obj:
                heapq.heappush(heap, (cbound, counter, clo, chi, child))

    if heap:
        lower_bound = max(lower_bound, min(heap[0][0], inc_obj))
    elif inc_x is not None:
        lower_bound = inc_obj

    if inc_x is None:
        if status == "node_limit":
            return MIQPSolution(None, np.inf, lower_bound, np.inf, "node_limit", nodes, branchings, trace, root, max_kkt)
        return MIQPSolution(None, np.inf, lower_bound, np.inf, "infeasible", nodes, branchings, trace, root, max_kkt)
    lower_bound = min(lower_bound, inc_obj)
    gap = relative_gap(inc_obj, lower_bound)
    if status != "node_limit":
        status = "optimal"
    return MIQPSolution(inc_x, inc_obj, lower_bound, gap, status, nodes, branchings, trace, root, max_kkt)


def solve_centralized(case, config):
    """Whole-network unit commitment without consensus terms.

    Returns ``(solution, gamma_c, gamma_c_lower)`` where ``gamma_c`` is the true
    operating cost of the incumbent and ``gamma_c_lower`` the search's lower bound.
    """
    from .case_model import whole_network
    from .subproblem import RegionModel

    total = case.total_demand()
    if np.any(total > case.total_capacity() + 1e-9):
        t = int(np.argmax(total - case.total_capacity()))
        raise InfeasibleError(f"demand {total[t]:.3f} exceeds total capacity {case.total_capacity():.3f} at t={t}")
    model = RegionModel(whole_network(case), penalties=False)
    sol = solve_miqp(
        model.miqp(None),
        mip_gap=config.mip_gap,
        node_limit=getattr(config, "node_limit", 100000),
        qp_tol=config.qp_tol,
    )
    if sol.x is None:
        raise InfeasibleError(f"centralized problem has no integral feasible point ({sol.status})")
    local = model.decode(sol.x, sol.objective)
    sol.solution = local
    return sol, local.obj_true, sol.lower_bound
