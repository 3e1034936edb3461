"""Convex quadratic programs.

Problems have the form::

    minimize    0.5 x'Qx + q'x + constant
    subject to  A x  = b
                G x <= h
                lo <= x <= hi

The interior-point work is delegated to Clarabel; this module owns the problem
container, the dual sign conventions, the KKT residual that decides whether a
solve counts as optimal, and phase-1 infeasibility certificates.

Dual convention: at an optimum ``Qx + q + A'duals_eq + G'duals_ineq +
duals_bounds = 0`` with ``duals_ineq >= 0``; ``duals_bounds`` is positive where
an upper bound is active and negative where a lower bound is active.
"""

from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import clarabel
import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration_limit"

PHASE1_THRESHOLD = 1e-6


class QPDimensionError(ValueError):
    pass


def _as_csc(m, shape):
    if m is None:
        return sp.csc_matrix(shape)
    if not (sp.isspmatrix_csc(m) and m.dtype == np.float64):
        m = sp.csc_matrix(m, dtype=float)
    if m.shape != shape:
        raise QPDimensionError(f"matrix shape {m.shape} != expected {shape}")
    return m


@dataclass
class QPProblem:
    n: int
    quadratic: sp.csc_matrix
    linear: np.ndarray
    eq_matrix: Optional[sp.csc_matrix] = None
    eq_rhs: Optional[np.ndarray] = None
    ineq_matrix: Optional[sp.csc_matrix] = None
    ineq_rhs: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    constant: float = 0.0

    def __post_init__(self):
        n = int(self.n)
        self.n = n
        self.linear = np.asarray(self.linear, dtype=float).reshape(-1)
        if self.linear.shape != (n,):
            raise QPDimensionError(f"linear term has length {self.linear.size}, expected {n}")
        self.quadratic = _as_csc(self.quadratic, (n, n))
        if self.eq_rhs is None:
            self.eq_rhs = np.zeros(0 if self.eq_matrix is None else self.eq_matrix.shape[0])
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float).reshape(-1)
        self.eq_matrix = _as_csc(self.eq_matrix, (self.eq_rhs.size, n))
        if self.ineq_rhs is None:
            self.ineq_rhs = np.zeros(0 if self.ineq_matrix is None else self.ineq_matrix.shape[0])
        self.ineq_rhs = np.asarray(self.ineq_rhs, dtype=float).reshape(-1)
        self.ineq_matrix = _as_csc(self.ineq_matrix, (self.ineq_rhs.size, n))
        self.lower = np.full(n, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=float).copy()
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).copy()
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise QPDimensionError("bounds must have length n")
        if np.any(self.lower > self.upper):
            bad = np.nonzero(self.lower > self.upper)[0]
            raise QPDimensionError(f"lo > hi for variables {bad.tolist()}")

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ (self.quadratic @ x) + self.linear @ x + self.constant)

    def with_bounds(self, lower: np.ndarray, upper: np.ndarray) -> "QPProblem":
        """Shallow copy sharing the matrices, with new variable bounds."""
        return QPProblem(
            self.n,
            self.quadratic,
            self.linear,
            self.eq_matrix,
            self.eq_rhs,
            self.ineq_matrix,
            self.ineq_rhs,
            lower,
            upper,
            self.constant,
        )


@dataclass
class QPSolution:
    x: np.ndarray
    duals_eq: np.ndarray
    duals_ineq: np.ndarray
    duals_bounds: np.ndarray
    objective: float
    kkt_residual: float
    status: str
    iterations: int = 0
    infeasibility: float = 0.0
    residuals: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def kkt_residuals(problem: QPProblem, x, duals_eq, duals_ineq, duals_bounds) -> dict:
    """Max-norm KKT residual components at a primal/dual point."""
    grad = problem.quadratic @ x + problem.linear
    stat = grad + problem.eq_matrix.T @ duals_eq + problem.ineq_matrix.T @ duals_ineq + duals_bounds
    eq_viol = problem.eq_matrix @ x - problem.eq_rhs
    ineq_gap = problem.ineq_matrix @ x - problem.ineq_rhs
    lo_gap = np.where(np.isfinite(problem.lower), problem.lower - x, -np.inf)
    hi_gap = np.where(np.isfinite(problem.upper), x - problem.upper, -np.inf)

    def mx(v):
        return float(np.max(np.abs(v))) if v.size else 0.0

    primal = max(
        mx(eq_viol),
        float(np.max(ineq_gap, initial=0.0)),
        float(np.max(lo_gap, initial=0.0)),
        float(np.max(hi_gap, initial=0.0)),
    )
    z_up = np.maximum(duals_bounds, 0.0)
    z_lo = np.maximum(-duals_bounds, 0.0)
    comp_b = np.concatenate(
        [
            z_up[np.isfinite(problem.upper)] * hi_gap[np.isfinite(problem.upper)],
            z_lo[np.isfinite(problem.lower)] * lo_gap[np.isfinite(problem.lower)],
        ]
    )
    # a bound dual on a side with no finite bound is a stationarity defect
    stray = np.concatenate([z_up[~np.isfinite(problem.upper)], z_lo[~np.isfinite(problem.lower)]])
    comp = max(mx(duals_ineq * ineq_gap), mx(comp_b))
    dual = max(float(np.max(-duals_ineq, initial=0.0)), mx(stray))
    return {"stationarity": mx(stat), "primal": primal, "complementarity": comp, "dual": dual}


_STACK_CACHE: "OrderedDict[tuple, tuple]" = OrderedDict()
_STACK_CACHE_SIZE = 32


def _stack_rows(problem: QPProblem):
    """Clarabel form: rows [A; G; I_hi; -I_lo] with cones Zero, Nonneg, plus
    the upper triangle of Q.

    The stacked matrix depends only on the shared matrices and on which bounds
    are finite, so it is cached across the many re-solves of one model.
    Cached entries hold references to their source matrices, which keeps the
    ``id`` keys unambiguous.
    """
    n = problem.n
    hi_mask = np.isfinite(problem.upper)
    lo_mask = np.isfinite(problem.lower)
    key = (id(problem.quadratic), id(problem.eq_matrix), id(problem.ineq_matrix), hi_mask.tobytes(), lo_mask.tobytes())
    hit = _STACK_CACHE.get(key)
    if hit is None:
        hi_idx = np.nonzero(hi_mask)[0]
        lo_idx = np.nonzero(lo_mask)[0]
        eye = sp.identity(n, format="csr")
        mat = sp.vstack([problem.eq_matrix, problem.ineq_matrix, eye[hi_idx], -eye[lo_idx]], format="csc")
        P = sp.triu(problem.quadratic).tocsc()
        hit = (mat, hi_idx, lo_idx, P, (problem.quadratic, problem.eq_matrix, problem.ineq_matrix))
        _STACK_CACHE[key] = hit
        if len(_STACK_CACHE) > _STACK_CACHE_SIZE:
            _STACK_CACHE.popitem(last=False)
    else:
        _STACK_CACHE.move_to_end(key)
    mat, hi_idx, lo_idx, P = hit[:4]
    rhs = np.concatenate([problem.eq_rhs, problem.ineq_rhs, problem.upper[hi_idx], -problem.lower[lo_idx]])
    return mat, rhs, hi_idx, lo_idx, P


def _settings(tol: float, iter_limit: int, refine: bool = True):
    s = clarabel.DefaultSettings()
    s.verbose = False
    s.max_iter = int(iter_limit)
    eps = min(1e-11, tol * 1e-5)
    s.tol_gap_abs = eps
    s.tol_gap_rel = eps
    s.tol_feas = eps
    s.tol_ktratio = min(1e-8, eps)
    s.presolve_enable = False
    s.max_threads = 1
    # refinement costs ~40% per solve; the KKT check catches the rare case it matters
    s.iterative_refinement_enable = refine
    return s


def _run_clarabel(P, q, A, b, m_eq, m_ineq, settings):
    cones = []
    if m_eq:
        cones.append(clarabel.ZeroConeT(m_eq))
    if m_ineq:
        cones.append(clarabel.NonnegativeConeT(m_ineq))
    if not cones:
        # Clarabel needs at least one constraint row
        A = sp.csc_matrix((1, P.shape[0]))
        b = np.zeros(1)
        cones = [clarabel.NonnegativeConeT(1)]
    solver = clarabel.DefaultSolver(P, q, A, b, cones, settings)
    return solver.solve()


def phase1(problem: QPProblem, tol: float = 1e-6, iter_limit: int = 200) -> float:
    """Minimum total constraint violation (L1) over the variable bounds.

    Returns 0 for feasible problems up to solver accuracy; a value above
    ``PHASE1_THRESHOLD`` certifies infeasibility.
    """
    n = problem.n
    m_eq = problem.eq_rhs.size
    m_in = problem.ineq_rhs.size
    nv = n + 2 * m_eq + m_in
    A = sp.hstack(
        [problem.eq_matrix, sp.identity(m_eq), -sp.identity(m_eq), sp.csc_matrix((m_eq, m_in))],
        format="csc",
    )
    G = sp.hstack([problem.ineq_matrix, sp.csc_matrix((m_in, 2 * m_eq)), -sp.identity(m_in)], format="csc")
    lower = np.concatenate([problem.lower, np.zeros(2 * m_eq + m_in)])
    # clip huge free bounds so the LP stays bounded in x
    upper = np.concatenate([problem.upper, np.full(2 * m_eq + m_in, np.inf)])
    c = np.concatenate([np.zeros(n), np.ones(2 * m_eq + m_in)])
    p1 = QPProblem(nv, sp.identity(nv, format="csc") * 1e-9, c, A, problem.eq_rhs, G, problem.ineq_rhs, lower, upper)
    mat, rhs, _, _, P = _stack_rows(p1)
    sol = _run_clarabel(
        P, p1.linear, mat, rhs, m_eq, mat.shape[0] - m_eq, _settings(tol, iter_limit)
    )
    x = np.asarray(sol.x)
    return float(c @ x)


def solve_qp(problem: QPProblem, tol: float = 1e-6, iter_limit: int = 200, _tight: bool = False) -> QPSolution:
    """Solve ``problem``; ``status == "optimal"`` only when the KKT residual <= ``tol``."""
    n = problem.n
    mat, rhs, hi_idx, lo_idx, P = _stack_rows(problem)
    m_eq = problem.eq_rhs.size
    m_in = problem.ineq_rhs.size
    settings = _settings(tol * 1e-7 if _tight else tol, iter_limit, refine=_tight)
    sol = _run_clarabel(P, problem.linear, mat, rhs, m_eq, mat.shape[0] - m_eq, settings)
    status = str(sol.status)
    x = np.asarray(sol.x, dtype=float)
    z = np.asarray(sol.z, dtype=float)
    if z.size != mat.shape[0]:
        z = np.zeros(mat.shape[0])
    duals_eq = z[:m_eq].copy()
    duals_ineq = z[m_eq : m_eq + m_in].copy()
    duals_bounds = np.zeros(n)
    off = m_eq + m_in
    duals_bounds[hi_idx] += z[off : off + hi_idx.size]
    duals_bounds[lo_idx] -= z[off + hi_idx.size :]

    if "Infeasible" in status and "Dual" not in status:
        certificate = phase1(problem, tol, iter_limit)
        if certificate > PHASE1_THRESHOLD:
            return QPSolution(
                x, duals_eq, duals_ineq, duals_bounds, float("nan"), float("inf"), INFEASIBLE,
                iterations=int(sol.iterations), infeasibility=certificate,
            )
        status = "Inaccurate"

    res = kkt_residuals(problem, x, duals_eq, duals_ineq, duals_bounds)
    kkt = max(res.values())
    if status in ("Solved", "AlmostSolved") and kkt > tol:
        res, x, duals_eq, duals_ineq, duals_bounds = _refine(problem, x, duals_eq, duals_ineq, duals_bounds, res)
        kkt = max(res.values())
    if status in ("Solved", "AlmostSolved") and kkt > tol and not _tight:
        # interior-point complementarity is relative; retry at near machine precision
        retry = solve_qp(problem, tol, iter_limit, _tight=True)
        if retry.status == OPTIMAL or retry.kkt_residual < kkt:
            return retry
    if status == "MaxIterations" or status.startswith("Insufficient"):
        out_status = ITERATION_LIMIT
    else:
        out_status = OPTIMAL if kkt <= tol else ITERATION_LIMIT
    if out_status != OPTIMAL:
        logger.debug("qp solve ended with clarabel status %s, kkt %.3g", status, kkt)
    return QPSolution(
        x,
        duals_eq,
        duals_ineq,
        duals_bounds,
        problem.objective(x),
        kkt,
        out_status,
        iterations=int(sol.iterations),
        residuals=res,
    )


def _refine(problem: QPProblem, x, duals_eq, duals_ineq, duals_bounds, res):
    """Clean up an interior-point answer by cutting duals of inactive rows.

    Clears tiny duals on constraints that are clearly slack and clips the
    primal into its bounds; accepted only when it lowers the residual.
    """
    x2 = np.clip(x, problem.lower, problem.upper)
    slack = problem.ineq_rhs - problem.ineq_matrix @ x2
    d_in = np.where(slack > 1e-7, 0.0, np.maximum(duals_ineq, 0.0))
    hi_slack = problem.upper - x2
    lo_slack = x2 - problem.lower
    d_b = duals_bounds.copy()
    d_b[(d_b > 0) & (hi_slack > 1e-7)] = 0.0
    d_b[(d_b < 0) & (lo_slack > 1e-7)] = 0.0
    res2 = kkt_residuals(problem, x2, duals_eq, d_in, d_b)
    if max(res2.values()) < max(res.values()):
        return res2, x2, duals_eq, d_in, d_b
    return res, x, duals_eq, duals_ineq, duals_bounds

