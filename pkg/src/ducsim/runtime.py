"""Run drivers: asynchronous event simulation, synchronous rounds, centralized.

Simulated time is in milliseconds. Message latencies come from one seeded
stream per directed edge (the controller has id ``region_count``), synthetic
compute times from one stream per region, so a run with a synthetic compute
model replays exactly.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
import queue
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .agent import Agent, DeltaTuple
from .case_model import Partition, PowerCase, RegionView, classify_all
from .controller import ControllerReply, ControllerState, check_gc, on_report
from .mip import solve_centralized
from .subproblem import LocalSolution

logger = logging.getLogger(__name__)


# -- distributions ------------------------------------------------------------

_SPEC = re.compile(r"^\s*([a-z_]+)\s*\(([^)]*)\)\s*$")


class Distribution:
    """``constant(v)``, ``uniform(a,b)``, ``lognormal(mu,sigma)`` or ``exponential(mean)``."""

    ARITY = {"constant": 1, "uniform": 2, "lognormal": 2, "exponential": 1}

    def __init__(self, spec: str):
        m = _SPEC.match(spec)
        if not m or m.group(1) not in self.ARITY:
            raise ValueError(f"unknown distribution spec {spec!r}")
        self.kind = m.group(1)
        self.params = tuple(float(v) for v in m.group(2).split(",") if v.strip())
        if len(self.params) != self.ARITY[self.kind]:
            raise ValueError(f"{self.kind} takes {self.ARITY[self.kind]} parameter(s), got {spec!r}")
        if self.kind == "uniform" and not 0 <= self.params[0] <= self.params[1]:
            raise ValueError(f"uniform bounds must satisfy 0 <= a <= b: {spec!r}")
        if self.kind in ("constant", "exponential") and self.params[0] < 0:
            raise ValueError(f"negative value in {spec!r}")
        self.spec = spec

    def sample(self, rng: np.random.Generator) -> float:
        k, p = self.kind, self.params
        if k == "constant":
            return p[0]
        if k == "uniform":
            return float(rng.uniform(p[0], p[1]))
        if k == "lognormal":
            return float(rng.lognormal(p[0], p[1]))
        return float(rng.exponential(p[0]))


class Streams:
    """Lazily created generators keyed by a tuple of small integers."""

    def __init__(self, seed: int, tag: int):
        self.seed = int(seed)
        self.tag = tag
        self._rngs: Dict[tuple, np.random.Generator] = {}

    def __call__(self, *key) -> np.random.Generator:
        if key not in self._rngs:
            self._rngs[key] = np.random.default_rng([self.seed, self.tag, *key])
        return self._rngs[key]


class Latency:
    def __init__(self, config, region_count):
        self.dist = Distribution(config.latency_model)
        self.streams = Streams(config.seed, 1)
        self.controller = region_count

    def __call__(self, src: int, dst: int) -> float:
        return self.dist.sample(self.streams(src, dst))


class ComputeTime:
    def __init__(self, config):
        self.measured = config.compute_model == "measured"
        self.dist = None if self.measured else Distribution(config.compute_model)
        self.scale = dict(config.compute_scale or {})
        self.streams = Streams(config.seed, 2)

    def __call__(self, region: int, measured_ms: float) -> float:
        base = measured_ms if self.measured else self.dist.sample(self.streams(region))
        return base * float(self.scale.get(region, 1.0))


# -- results -----------------------------------------------------------------


@dataclass
class RegionTiming:
    updates: int = 0
    compute_ms: float = 0.0
    comm_ms: float = 0.0
    idle_ms: float = 0.0
    total_ms: float = 0.0

    def as_dict(self):
        return {
            "updates": self.updates,
            "compute_ms": self.compute_ms,
            "comm_ms": self.comm_ms,
            "idle_ms": self.idle_ms,
            "total_ms": self.total_ms,
        }


@dataclass
class GlobalSchedule:
    x: np.ndarray
    y: np.ndarray
    flows: Dict[Tuple[int, int], np.ndarray]
    mismatch: Dict[Tuple[int, int], float]
    theta: Dict[int, np.ndarray]

    @property
    def max_mismatch(self) -> float:
        return max(self.mismatch.values(), default=0.0)

    def to_json(self) -> dict:
        return {
            "x": self.x.round(12).tolist(),
            "y": self.y.tolist(),
            "flows": {f"{k[0]}-{k[1]}": v.tolist() for k, v in sorted(self.flows.items())},
            "mismatch": {f"{k[0]}-{k[1]}": v for k, v in sorted(self.mismatch.items())},
        }


@dataclass
class RunResult:
    mode: str
    converged: bool
    final_objective: float
    per_region: List[RegionTiming]
    iterations_to_gc: int
    wall_clock_sim: float
    trace: List[dict]
    solution: Optional[GlobalSchedule]
    local_solutions: Dict[int, LocalSolution] = field(default_factory=dict)
    iterations: List[dict] = field(default_factory=list)
    views: Dict[int, RegionView] = field(default_factory=dict)
    status: str = ""
    max_kkt: float = 0.0
    lower_bound: Optional[float] = None

    def balance_residual(self) -> float:
        return max(
            (bus_balance_residual(self.views[r], s) for r, s in self.local_solutions.items()),
            default=0.0,
        )


@dataclass
class Metrics:
    async_degree: float
    gap_percent: Optional[float]
    sim_total_ms: float
    compute_ms: float
    comm_ms: float
    idle_ms: float
    compute_share: float
    comm_share: float
    idle_share: float
    iterations_to_gc: int

    def as_dict(self):
        return dict(self.__dict__)


def compute_metrics(result: RunResult, central: Optional[Tuple[float, float]] = None) -> Metrics:
    """Asynchronous degree, optimality gap against ``central = (gamma_c, floor)``
    and time totals summed over regions."""
    updates = [p.updates for p in result.per_region]
    degree = min(updates) / max(updates) if updates and max(updates) > 0 else 1.0
    gap = None
    if central is not None:
        floor = central[1]
        gap = (result.final_objective - floor) * 100.0 / floor
    comp = sum(p.compute_ms for p in result.per_region)
    comm = sum(p.comm_ms for p in result.per_region)
    idle = sum(p.idle_ms for p in result.per_region)
    total = comp + comm + idle
    share = (lambda v: 100.0 * v / total) if total > 0 else (lambda v: 0.0)
    return Metrics(
        degree, gap, result.wall_clock_sim, comp, comm, idle,
        share(comp), share(comm), share(idle), result.iterations_to_gc,
    )


def bus_balance_residual(view: RegionView, sol: LocalSolution) -> float:
    """Largest |generation - demand - net injection| over the owned buses, using
    the region's own angles."""
    worst = 0.0
    lines = view.local_lines + view.tie_lines
    for i, b in enumerate(view.owned):
        gen = sum(sol.y[gi] for gi, g in enumerate(view.generators) if g.bus == b)
        net = np.zeros(view.horizon)
        for line in lines:
            if b in (line.from_bus, line.to_bus):
                net += line.susceptance * (sol.theta_of(b) - sol.theta_of(line.other(b)))
        worst = max(worst, float(np.max(np.abs(gen - view.demand[i] - net))))
    return worst


def merge_solution(views: Dict[int, RegionView], solutions: Dict[int, LocalSolution]) -> GlobalSchedule:
    gens = sorted((g.id, r, gi) for r, v in views.items() for gi, g in enumerate(v.generators))
    T = next(iter(views.values())).horizon
    x = np.zeros((len(gens), T))
    y = np.zeros((len(gens), T))
    for row, (_gid, r, gi) in enumerate(gens):
        x[row] = solutions[r].x[gi]
        y[row] = solutions[r].y[gi]
    per_line: Dict[Tuple[int, int], List[np.ndarray]] = {}
    theta = {}
    for r, v in views.items():
        sol = solutions[r]
        for li, line in enumerate(v.tie_lines):
            per_line.setdefault(line.key, []).append(sol.flow[li])
        for b in v.owned:
            theta[b] = sol.theta_of(b)
        for line in v.local_lines:
            per_line.setdefault(line.key, []).append(
                line.susceptance * (sol.theta_of(line.from_bus) - sol.theta_of(line.to_bus))
            )
    flows, mismatch = {}, {}
    for key, vals in per_line.items():
        flows[key] = np.mean(vals, axis=0)
        mismatch[key] = float(np.max(np.abs(vals[0] - vals[-1]))) if len(vals) > 1 else 0.0
    return GlobalSchedule(x, y, flows, mismatch, theta)


def _finish(mode, agents, views, finals, timings, t_end, trace, records, converged, status) -> RunResult:
    solutions = {r: finals[r] for r in views if finals.get(r) is not None}
    schedule = merge_solution(views, solutions) if len(solutions) == len(views) else None
    gamma = float(sum(s.obj_true for s in solutions.values()))
    kkt = max((max(a.kkt_history, default=0.0) for a in agents), default=0.0)
    return RunResult(
        mode=mode,
        converged=converged,
        final_objective=gamma,
        per_region=timings,
        iterations_to_gc=max(t.updates for t in timings),
        wall_clock_sim=t_end,
        trace=trace,
        solution=schedule,
        local_solutions=solutions,
        iterations=records,
        views=views,
        status=status,
        max_kkt=kkt,
    )


def _neighbors(views) -> Dict[int, Tuple[int, ...]]:
    return {r: tuple(v.neighbors) for r, v in views.items()}


def _record(agent: Agent, solve_ms: float) -> dict:
    return agent.trace_record(solve_ms=solve_ms)


# -- asynchronous simulator -----------------------------------------------------


class _AsyncSim:
    def __init__(self, case, partition, config):
        self.config = config
        self.R = partition.region_count
        self.T = case.horizon
        self.views = dict(enumerate(classify_all(case, partition)))
        self.nbrs = _neighbors(self.views)
        self.agents = [Agent(self.views[r], config, self.R) for r in range(self.R)]
        self.ctrl = ControllerState(self.R, self.T)
        self.latency = Latency(config, self.R)
        self.compute_time = ComputeTime(config)
        self.heap: list = []
        self.seq = 0
        self.trace: List[dict] = []
        self.records: List[dict] = []
        self.timing = [RegionTiming() for _ in range(self.R)]
        self.window_start = [0.0] * self.R
        self.chain_comm = [0.0] * self.R
        self.busy_until = [0.0] * self.R
        self.solve_ends: List[List[float]] = [[] for _ in range(self.R)]
        self.buffer: Dict[int, DeltaTuple] = {}
        self.reported: Dict[int, LocalSolution] = {}
        self.inflight: Dict[int, LocalSolution] = {}

    def push(self, t, kind, *payload):
        heapq.heappush(self.heap, (t, self.seq, kind, payload))
        self.seq += 1

    def log(self, t, event, **fields):
        self.trace.append({"t": t, "event": event, **fields})

    def wake(self, t, r):
        W = t - self.window_start[r]
        comm = min(W, self.chain_comm[r])
        self.timing[r].comm_ms += comm
        self.timing[r].idle_ms += W - comm
        agent = self.agents[r]
        self.log(t, "wake", region=r, k=agent.k)
        report = agent.compute()
        dur = self.compute_time(r, agent.last_solve_ms)
        rec = _record(agent, dur)
        self.records.append(rec)
        self.log(t, "solve", **rec)
        end = t + dur
        self.timing[r].compute_ms += dur
        self.busy_until[r] = end
        self.solve_ends[r].append(end)
        self.window_start[r] = end
        lat = self.latency(r, self.R)
        self.chain_comm[r] = lat
        self.inflight[r] = agent.last
        self.push(end + lat, "report", r, report, agent.last, lat)

    def run(self):
        cfg = self.config
        for r in range(self.R):
            self.push(0.0, "wake", r)
        t = 0.0
        converged, status = False, "max_iters"
        while self.heap:
            t, _, kind, payload = heapq.heappop(self.heap)
            if kind == "wake":
                self.wake(t, payload[0])
            elif kind == "report":
                r, report, sol, lat = payload
                self.log(t, "delivery", msg="report", src=r, dst="controller", latency=lat, body=report.to_json())
                self.reported[r] = sol
                replies = on_report(self.ctrl, report, self.nbrs)
                if replies:
                    self.log(t, "match", regions=[rcp for rcp, _ in replies], pending=list(self.ctrl.pending))
                for rcp, reply in replies:
                    lat2 = self.latency(self.R, rcp)
                    self.push(t + lat2, "reply", rcp, reply, lat2)
                if check_gc(self.ctrl):
                    converged, status = True, "gc"
                    self.log(t, "gc")
                    break
            elif kind == "reply":
                r, reply, lat = payload
                self.log(t, "delivery", msg="reply", src="controller", dst=r, latency=lat, body=reply.to_json())
                self.chain_comm[r] += lat
                agent = self.agents[r]
                agent.receive_sums(reply)
                if reply.partner is None:
                    if self.complete(t, r):
                        break
                    continue
                delta = agent.make_delta(reply.partner)
                lat3 = self.latency(r, reply.partner)
                self.push(t + lat3, "delta", reply.partner, delta, lat3)
                if r in self.buffer and self.buffer[r].sender == reply.partner:
                    if self.absorb(t, r, self.buffer.pop(r)):
                        break
            elif kind == "delta":
                r, delta, lat = payload
                self.log(t, "delivery", msg="delta", src=delta.sender, dst=r, latency=lat)
                self.chain_comm[r] += lat
                agent = self.agents[r]
                if agent.partner == delta.sender and agent._phase == "exchanging":
                    if self.absorb(t, r, delta):
                        break
                else:
                    if r in self.buffer:
                        raise RuntimeError(f"region {r}: second delta buffered")
                    self.buffer[r] = delta
        return self.result(t, converged, status)

    def absorb(self, t, r, delta) -> bool:
        self.agents[r].apply_delta(delta)
        return self.complete(t, r)

    def complete(self, t, r) -> bool:
        agent = self.agents[r]
        agent.finish()
        if agent.k >= self.config.max_iters:
            self.log(t, "max_iters", region=r)
            return True
        self.push(t, "wake", r)
        return False

    def result(self, t_end, converged, status) -> RunResult:
        for r in range(self.R):
            tm = self.timing[r]
            if self.busy_until[r] > t_end:
                tm.compute_ms -= self.busy_until[r] - t_end
            else:
                W = t_end - self.window_start[r]
                comm = min(W, self.chain_comm[r])
                tm.comm_ms += comm
                tm.idle_ms += W - comm
            tm.updates = sum(1 for e in self.solve_ends[r] if e <= t_end)
            tm.total_ms = t_end
        finals = {r: self.reported.get(r, self.inflight.get(r)) for r in range(self.R)}
        return _finish(
            "async", self.agents, self.views, finals, self.timing, t_end,
            self.trace, self.records, converged, status,
        )


def run_async(case: PowerCase, partition: Partition, config, backend: str = "simulator") -> RunResult:
    """Asynchronous run; ``backend`` is ``"simulator"`` (deterministic event
    queue) or ``"threads"`` (one worker per agent plus the controller)."""
    if backend == "threads":
        return _run_threads(case, partition, config)
    if backend != "simulator":
        raise ValueError(f"unknown backend {backend!r}")
    return _AsyncSim(case, partition, config).run()


# -- synchronous rounds -------------------------------------------------------------


def run_sync(case: PowerCase, partition: Partition, config) -> RunResult:
    """Lockstep baseline: every round all regions solve, the sums are exact,
    every region exchanges with every neighbour, and the multiplier is fixed
    at ``1/|R|``."""
    R, T = partition.region_count, case.horizon
    views = dict(enumerate(classify_all(case, partition)))
    agents = [Agent(views[r], config, R, interleaved=False, fixed_mu=1.0 / R) for r in range(R)]
    ctrl = ControllerState(R, T)
    latency = Latency(config, R)
    compute_time = ComputeTime(config)
    timing = [RegionTiming() for _ in range(R)]
    trace: List[dict] = []
    records: List[dict] = []
    finals: Dict[int, LocalSolution] = {}
    t = 0.0
    converged, status = False, "max_iters"
    for rnd in range(config.max_iters):
        reports, durs, to_ctrl = [], [], []
        for a in agents:
            trace.append({"t": t, "event": "wake", "region": a.region, "k": a.k})
            rep = a.compute()
            dur = compute_time(a.region, a.last_solve_ms)
            rec = _record(a, dur)
            records.append(rec)
            trace.append({"t": t, "event": "solve", **rec})
            reports.append(rep)
            durs.append(dur)
            to_ctrl.append(latency(a.region, R))
        arrive = [t + d + l for d, l in zip(durs, to_ctrl)]
        for r in sorted(range(R), key=lambda i: (arrive[i], i)):
            trace.append({"t": arrive[r], "event": "delivery", "msg": "report", "src": r, "dst": "controller",
                          "latency": to_ctrl[r], "body": reports[r].to_json()})
            ctrl.psi_tilde[r] = reports[r].psi
            ctrl.s_tilde[r] = reports[r].s
            ctrl.xi[r] = reports[r].xi
            ctrl.kappa[r] = reports[r].kappa
        t_ctrl = max(arrive)
        for a in agents:
            finals[a.region] = a.last
        if check_gc(ctrl):
            for r in range(R):
                timing[r].compute_ms += durs[r]
                timing[r].comm_ms += to_ctrl[r]
                timing[r].idle_ms += t_ctrl - t - durs[r] - to_ctrl[r]
                timing[r].updates += 1
            t = t_ctrl
            converged, status = True, "gc"
            trace.append({"t": t, "event": "gc"})
            break
        trace.append({"t": t_ctrl, "event": "match", "regions": list(range(R)), "pending": []})
        sums = (
            tuple(float(v) for v in ctrl.psi_tilde.sum(axis=0)),
            tuple(float(v) for v in ctrl.s_tilde.sum(axis=0)),
            int(ctrl.xi.sum()),
        )
        from_ctrl = [latency(R, r) for r in range(R)]
        got_reply = [t_ctrl + l for l in from_ctrl]
        for a in agents:
            reply = ControllerReply(*sums, None)
            trace.append({"t": got_reply[a.region], "event": "delivery", "msg": "reply", "src": "controller",
                          "dst": a.region, "latency": from_ctrl[a.region], "body": reply.to_json()})
            a.receive_sums(reply)
        deltas = [a.make_delta(nb) for a in agents for nb in views[a.region].neighbors]
        done = list(got_reply)
        delta_lat = [0.0] * R
        for d in deltas:
            lat = latency(d.sender, d.receiver)
            at = got_reply[d.sender] + lat
            trace.append({"t": at, "event": "delivery", "msg": "delta", "src": d.sender, "dst": d.receiver,
                          "latency": lat})
            done[d.receiver] = max(done[d.receiver], at)
            delta_lat[d.receiver] = max(delta_lat[d.receiver], lat)
            agents[d.receiver].apply_delta(d)
        for a in agents:
            a.finish()
        t_next = max(done)
        for r in range(R):
            comm = to_ctrl[r] + from_ctrl[r] + delta_lat[r]
            timing[r].compute_ms += durs[r]
            timing[r].comm_ms += comm
            timing[r].idle_ms += (t_next - t) - durs[r] - comm
            timing[r].updates += 1
        t = t_next
    for tm in timing:
        tm.total_ms = t
    return _finish("sync", agents, views, finals, timing, t, trace, records, converged, status)


# -- centralized -------------------------------------------------------------------


def run_central(case: PowerCase, partition: Partition, config) -> RunResult:
    from .case_model import whole_network

    started = time.perf_counter()
    sol, gamma_c, lower = solve_centralized(case, config)
    ms = 1000.0 * (time.perf_counter() - started)
    view = whole_network(case)
    timing = [RegionTiming(updates=1, compute_ms=ms, total_ms=ms)]
    trace = [{"t": 0.0, "event": "solve", "region": 0, "nodes": sol.nodes, "status": sol.status}]
    res = RunResult(
        mode="central",
        converged=sol.status == "optimal",
        final_objective=gamma_c,
        per_region=timing,
        iterations_to_gc=1,
        wall_clock_sim=ms,
        trace=trace,
        solution=merge_solution({0: view}, {0: sol.solution}),
        local_solutions={0: sol.solution},
        views={0: view},
        status=sol.status,
        max_kkt=sol.max_kkt,
        lower_bound=lower,
    )
    return res


def run(case, partition, config, backend: str = "simulator") -> RunResult:
    if config.mode == "async":
        return run_async(case, partition, config, backend=backend)
    if config.mode == "sync":
        return run_sync(case, partition, config)
    if config.mode == "central":
        return run_central(case, partition, config)
    raise ValueError(f"unknown mode {config.mode!r}")


# -- concurrent backend ----------------------------------------------------------------

_STOP = object()


def _run_threads(case, partition, config) -> RunResult:
    """Agents and controller as threads exchanging immutable messages through
    queues. Timing is wall clock; waiting counts as idle (delivery is
    in-process, so comm is zero). Traces are not reproducible."""
    R = partition.region_count
    views = dict(enumerate(classify_all(case, partition)))
    nbrs = _neighbors(views)
    agents = [Agent(views[r], config, R) for r in range(R)]
    inbox = [queue.Queue() for _ in range(R)]
    ctrl_box: queue.Queue = queue.Queue()
    stop = threading.Event()
    lock = threading.Lock()
    trace: List[dict] = []
    records: List[dict] = []
    timing = [RegionTiming() for _ in range(R)]
    reported: Dict[int, LocalSolution] = {}
    outcome = {"converged": False, "status": "max_iters", "error": None}
    t0 = time.perf_counter()

    def now():
        return 1000.0 * (time.perf_counter() - t0)

    def log(ev):
        with lock:
            trace.append(ev)

    def wait_for(r, want):
        """Next message of type ``want`` from region r's inbox; deltas that
        arrive early are held back."""
        held = []
        try:
            while True:
                msg = inbox[r].get()
                if msg is _STOP:
                    return None
                if isinstance(msg, want):
                    return msg
                held.append(msg)
        finally:
            for m in held:
                inbox[r].put(m)

    def agent_loop(r):
        a = agents[r]
        try:
            while not stop.is_set():
                start = now()
                log({"t": start, "event": "wake", "region": r, "k": a.k})
                report = a.compute()
                timing[r].compute_ms += now() - start
                timing[r].updates += 1
                with lock:
                    records.append(_record(a, a.last_solve_ms))
                ctrl_box.put((report, a.last))
                w = now()
                reply = wait_for(r, ControllerReply)
                if reply is None:
                    timing[r].idle_ms += now() - w
                    return
                a.receive_sums(reply)
                if reply.partner is not None:
                    inbox[reply.partner].put(a.make_delta(reply.partner))
                    delta = wait_for(r, DeltaTuple)
                    if delta is None:
                        timing[r].idle_ms += now() - w
                        return
                    a.apply_delta(delta)
                a.finish()
                timing[r].idle_ms += now() - w
                if a.k >= config.max_iters:
                    stop.set()
                    ctrl_box.put(_STOP)
                    return
        except Exception as exc:  # surfaced after join
            outcome["error"] = exc
            stop.set()
            ctrl_box.put(_STOP)

    def controller_loop():
        state = ControllerState(R, case.horizon)
        while True:
            msg = ctrl_box.get()
            if msg is _STOP:
                break
            report, sol = msg
            reported[report.region] = sol
            replies = on_report(state, report, nbrs)
            if replies:
                log({"t": now(), "event": "match", "regions": [rcp for rcp, _ in replies]})
            for rcp, reply in replies:
                inbox[rcp].put(reply)
            if check_gc(state):
                outcome["converged"], outcome["status"] = True, "gc"
                stop.set()
                break
        for box in inbox:
            box.put(_STOP)

    threads = [threading.Thread(target=agent_loop, args=(r,), daemon=True) for r in range(R)]
    ctl = threading.Thread(target=controller_loop, daemon=True)
    ctl.start()
    for th in threads:
        th.start()
    ctl.join()
    for th in threads:
        th.join()
    if outcome["error"] is not None:
        raise outcome["error"]
    t_end = now()
    for tm in timing:
        tm.total_ms = t_end
        tm.idle_ms = max(0.0, t_end - tm.compute_ms)
    trace.sort(key=lambda e: e["t"])
    return _finish("async", agents, views, reported, timing, t_end, trace, records,
                   outcome["converged"], outcome["status"])


# -- trace files -------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_jsonl(path, rows: Sequence[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(_jsonable(row), sort_keys=True, separators=(",", ":")))
            fh.write("\n")
