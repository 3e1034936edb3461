"""Independent reference computations used to derive and cross-check frozen test values.

Nothing here imports the solver stack of the package: the UC oracle enumerates
commitment patterns and prices each with a dispatch LP solved by scipy/HiGHS.
"""

import itertools

import numpy as np
from scipy.optimize import linprog


def brute_force_sets(case, owner, r):
    """Internal/boundary/foreign bus sets by scanning every line."""
    owned = {b for b in case.buses if owner[b] == r}
    boundary, foreign = set(), set()
    for ln in case.lines:
        for a, b in ((ln.from_bus, ln.to_bus), (ln.to_bus, ln.from_bus)):
            if a in owned and b not in owned:
                boundary.add(a)
                foreign.add(b)
    return owned - boundary, boundary, foreign


def _switching(x):
    """Minimal start-up / shut-down indicators for a commitment matrix (units off before t=0)."""
    prev = np.hstack([np.zeros((x.shape[0], 1)), x[:, :-1]])
    return np.maximum(0, x - prev), np.maximum(0, prev - x)


def pattern_ok(case, x):
    su, sd = _switching(x)
    for gi, g in enumerate(case.generators):
        for t in range(case.horizon):
            lo_u = max(0, t - g.min_up + 1)
            if su[gi, lo_u:t + 1].sum() > x[gi, t] + 1e-9:
                return False
            lo_d = max(0, t - g.min_down + 1)
            if x[gi, t] + sd[gi, lo_d:t + 1].sum() > 1 + 1e-9:
                return False
    return True


def dispatch_lp(case, x):
    """Cheapest dispatch for a fixed commitment, or None if infeasible.

    Variables: y[g, t] then theta[b, t]; bus 0 is the angle reference.
    """
    G, N, T = len(case.generators), case.n_buses, case.horizon
    ny = G * T
    n = ny + N * T
    iy = lambda g, t: g * T + t
    ith = lambda b, t: ny + b * T + t
    c = np.zeros(n)
    bounds = [(0.0, 0.0)] * n
    for gi, g in enumerate(case.generators):
        for t in range(T):
            c[iy(gi, t)] = g.cost_dispatch
            bounds[iy(gi, t)] = (g.p_min * x[gi, t], g.p_max * x[gi, t])
    for b in range(N):
        for t in range(T):
            bounds[ith(b, t)] = (0.0, 0.0) if b == 0 else (None, None)
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for gi, g in enumerate(case.generators):
        for t in range(1, T):
            row = np.zeros(n)
            row[iy(gi, t)], row[iy(gi, t - 1)] = 1, -1
            A_ub += [row, -row]
            b_ub += [g.ramp, g.ramp]
    for ln in case.lines:
        for t in range(T):
            row = np.zeros(n)
            row[ith(ln.from_bus, t)] = ln.susceptance
            row[ith(ln.to_bus, t)] = -ln.susceptance
            A_ub += [row, -row]
            b_ub += [ln.f_max, ln.f_max]
    for b in range(N):
        for t in range(T):
            row = np.zeros(n)
            for gi, g in enumerate(case.generators):
                if g.bus == b:
                    row[iy(gi, t)] += 1
            for ln in case.lines:
                if ln.from_bus == b:
                    row[ith(ln.from_bus, t)] -= ln.susceptance
                    row[ith(ln.to_bus, t)] += ln.susceptance
                elif ln.to_bus == b:
                    row[ith(ln.from_bus, t)] += ln.susceptance
                    row[ith(ln.to_bus, t)] -= ln.susceptance
            A_eq.append(row)
            b_eq.append(case.demand[b, t])
    res = linprog(c, A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
                  A_eq=np.array(A_eq), b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        return None
    return float(res.fun)


def commitment_cost(case, x):
    su, sd = _switching(x)
    total = 0.0
    for gi, g in enumerate(case.generators):
        total += g.cost_commit * x[gi].sum() + g.cost_startup * su[gi].sum() + g.cost_shutdown * sd[gi].sum()
    return float(total)


def enumerate_uc(case):
    """Exact UC optimum by enumerating all commitment patterns. Returns (cost, x)."""
    G, T = len(case.generators), case.horizon
    best, best_x = np.inf, None
    for bits in itertools.product((0, 1), repeat=G * T):
        x = np.array(bits, dtype=float).reshape(G, T)
        if not pattern_ok(case, x):
            continue
        cap = sum(g.p_max * x[i] for i, g in enumerate(case.generators))
        if np.any(cap < case.total_demand() - 1e-9):
            continue
        fixed = commitment_cost(case, x)
        if fixed >= best:
            continue
        disp = dispatch_lp(case, x)
        if disp is not None and fixed + disp < best:
            best, best_x = fixed + disp, x
    return best, best_x


def lp_relaxation_bound(case, x_relaxed_ok=True):
    """Lower bound on the UC optimum from the LP relaxation (x, su, sd in [0, 1])."""
    G, N, T = len(case.generators), case.n_buses, case.horizon
    off = {"x": 0, "su": G * T, "sd": 2 * G * T, "y": 3 * G * T, "th": 4 * G * T}
    n = 4 * G * T + N * T
    ix = lambda k, g, t: off[k] + g * T + t
    ith = lambda b, t: off["th"] + b * T + t
    c = np.zeros(n)
    bounds = [(0.0, 1.0)] * (3 * G * T) + [(0.0, None)] * (G * T) + [(None, None)] * (N * T)
    for t in range(T):
        bounds[ith(0, t)] = (0.0, 0.0)
    A_ub, b_ub, A_eq, b_eq = [], [], [], []

    def row():
        return np.zeros(n)

    for gi, g in enumerate(case.generators):
        for t in range(T):
            c[ix("x", gi, t)] = g.cost_commit
            c[ix("su", gi, t)] = g.cost_startup
            c[ix("sd", gi, t)] = g.cost_shutdown
            c[ix("y", gi, t)] = g.cost_dispatch
            r = row(); r[ix("y", gi, t)] = 1; r[ix("x", gi, t)] = -g.p_max; A_ub.append(r); b_ub.append(0)
            r = row(); r[ix("y", gi, t)] = -1; r[ix("x", gi, t)] = g.p_min; A_ub.append(r); b_ub.append(0)
            # su - sd = x_t - x_{t-1}
            r = row(); r[ix("su", gi, t)] = 1; r[ix("sd", gi, t)] = -1; r[ix("x", gi, t)] = -1
            if t > 0:
                r[ix("x", gi, t - 1)] = 1
            A_eq.append(r); b_eq.append(0)
            r = row()
            for s in range(max(0, t - g.min_up + 1), t + 1):
                r[ix("su", gi, s)] += 1
            r[ix("x", gi, t)] -= 1
            A_ub.append(r); b_ub.append(0)
            r = row()
            for s in range(max(0, t - g.min_down + 1), t + 1):
                r[ix("sd", gi, s)] += 1
            r[ix("x", gi, t)] += 1
            A_ub.append(r); b_ub.append(1)
            if t > 0:
                r = row(); r[ix("y", gi, t)] = 1; r[ix("y", gi, t - 1)] = -1
                A_ub += [r, -r]; b_ub += [g.ramp, g.ramp]
    for ln in case.lines:
        for t in range(T):
            r = row(); r[ith(ln.from_bus, t)] = ln.susceptance; r[ith(ln.to_bus, t)] = -ln.susceptance
            A_ub += [r, -r]; b_ub += [ln.f_max, ln.f_max]
    for b in range(N):
        for t in range(T):
            r = row()
            for gi, g in enumerate(case.generators):
                if g.bus == b:
                    r[ix("y", gi, t)] += 1
            for ln in case.lines:
                sign = 1 if ln.from_bus == b else (-1 if ln.to_bus == b else 0)
                if sign:
                    r[ith(ln.from_bus, t)] -= sign * ln.susceptance
                    r[ith(ln.to_bus, t)] += sign * ln.susceptance
            A_eq.append(r); b_eq.append(case.demand[b, t])
    res = linprog(c, A_ub=np.array(A_ub), b_ub=b_ub, A_eq=np.array(A_eq), b_eq=b_eq, bounds=bounds, method="highs")
    assert res.status == 0, res.message
    return float(res.fun)
