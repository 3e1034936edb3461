"""``ducsim`` command line: run, gen-case, report."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from .case_io import RunConfig, gen_synthetic, load_case, load_config, load_partition, save_case, save_config, save_partition
from .mip import solve_centralized
from .runtime import compute_metrics, run, write_jsonl

log = logging.getLogger("ducsim")

CSV_COLUMNS = [
    "mode", "seed", "zeta", "regions", "gamma", "gap_percent", "async_degree",
    "sim_total_ms", "compute_ms", "comm_ms", "idle_ms", "iterations_to_gc",
]


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def cmd_run(args) -> int:
    case = load_case(args.case)
    partition = load_partition(args.partition, n_buses=case.n_buses)
    overrides = {"mode": args.mode}
    if args.seed is not None:
        overrides["seed"] = args.seed
    config = load_config(args.config, **overrides) if args.config else RunConfig(**overrides)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    result = run(case, partition, config, backend=args.backend)
    central = None
    if config.mode == "central":
        central = (result.final_objective, result.lower_bound)
    elif not args.no_oracle:
        _, gamma_c, floor = solve_centralized(case, config)
        central = (gamma_c, floor)
    metrics = compute_metrics(result, central)

    summary = {
        "mode": config.mode,
        "seed": config.seed,
        "zeta": config.zeta,
        "regions": partition.region_count,
        "gamma": result.final_objective,
        "gamma_c": central[0] if central else None,
        "gamma_c_floor": central[1] if central else None,
        "converged": result.converged,
        "status": result.status,
        "max_kkt": result.max_kkt,
        "max_flow_mismatch": result.solution.max_mismatch if result.solution else None,
        "balance_residual": result.balance_residual(),
        "per_region": [p.as_dict() for p in result.per_region],
        **metrics.as_dict(),
    }
    (out / "result.json").write_text(json.dumps({k: _clean(v) for k, v in summary.items()}, indent=1, sort_keys=True))
    write_jsonl(out / "trace.jsonl", result.trace)
    write_jsonl(out / "iterations.jsonl", result.iterations)
    if result.solution is not None:
        (out / "schedule.json").write_text(json.dumps(result.solution.to_json(), sort_keys=True))
    save_config(config, out / "config.cfg")

    gap = "n/a" if metrics.gap_percent is None else f"{metrics.gap_percent:.3f}%"
    print(f"{config.mode}: status={result.status} gamma={result.final_objective:.4f} gap={gap} "
          f"iterations={result.iterations_to_gc} sim_total={result.wall_clock_sim:.1f}ms -> {out}")
    return 0 if result.converged else 2


def cmd_gen_case(args) -> int:
    case, partition = gen_synthetic(args.buses, args.regions, args.horizon, args.seed)
    out = Path(args.out)
    save_case(case, out)
    part_path = Path(args.partition_out) if args.partition_out else out.with_name(out.stem + ".partition.json")
    save_partition(partition, part_path)
    print(f"wrote {out} and {part_path}")
    return 0


def collect_rows(runs_dir) -> list:
    rows = []
    for path in sorted(Path(runs_dir).rglob("result.json")):
        data = json.loads(path.read_text())
        rows.append({c: data.get(c) for c in CSV_COLUMNS})
    return rows


def cmd_report(args) -> int:
    rows = collect_rows(args.runs)
    if not rows:
        print(f"no result.json found under {args.runs}", file=sys.stderr)
        return 1
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: "" if v is None else v for k, v in row.items()})
    print(f"{len(rows)} runs -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ducsim", description="Decentralized unit-commitment simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="solve a case in async, sync or central mode")
    r.add_argument("--mode", choices=["async", "sync", "central"], required=True)
    r.add_argument("--case", required=True)
    r.add_argument("--partition", required=True)
    r.add_argument("--config")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", required=True)
    r.add_argument("--backend", choices=["simulator", "threads"], default="simulator")
    r.add_argument("--no-oracle", action="store_true", help="skip the centralized solve used for the gap")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("gen-case", help="generate a seeded synthetic case and partition")
    g.add_argument("--buses", type=int, required=True)
    g.add_argument("--regions", type=int, required=True)
    g.add_argument("--horizon", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--partition-out")
    g.set_defaults(func=cmd_gen_case)

    rep = sub.add_parser("report", help="collect run directories into a CSV")
    rep.add_argument("--runs", required=True)
    rep.add_argument("--out", required=True)
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"ducsim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
