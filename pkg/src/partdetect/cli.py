"""Command-line front end: ``run``, ``sweep`` and ``topo gen|check``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .graph import (
    TOPOLOGY_KINDS,
    DroneParams,
    GraphError,
    byz_partitionable_oracle,
    gen_drone,
    gen_topology,
    is_partitioned,
    read_graph,
    vertex_connectivity,
    write_graph,
)
from .harness import ConfigError, ScenarioConfig, rows_to_csv, run_scenario, sweep


def _load_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(path, str(exc))


def cmd_run(args) -> int:
    raw = _load_json(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out is not None:
        raw["output"] = args.out
    cfg = ScenarioConfig.from_dict(raw)
    result, _ = run_scenario(cfg)
    sys.stdout.write(rows_to_csv([result.row()]))
    return 0


def cmd_sweep(args) -> int:
    base = _load_json(args.config)
    if args.seed is not None:
        base["seed"] = args.seed
    grid = _load_json(args.grid)
    rows, failures = sweep(base, grid, out_dir=args.out)
    sys.stdout.write(rows_to_csv(rows))
    for idx, msg in failures:
        print(f"grid point {idx} failed: {msg}", file=sys.stderr)
    return 1 if failures else 0


def cmd_topo_gen(args) -> int:
    if args.kind == "drone":
        g = gen_drone(DroneParams(args.n, args.d, args.radius, args.seed))
    else:
        if args.k is None:
            raise GraphError("--k is required for this topology kind")
        g = gen_topology(args.kind, args.n, args.k, args.seed)
    if args.out:
        write_graph(g, args.out)
    else:
        sys.stdout.write(g.to_text())
    return 0


def cmd_topo_check(args) -> int:
    g = read_graph(args.graph)
    kappa = vertex_connectivity(g)
    report = {"n": g.n, "m": g.m, "vertex_connectivity": kappa, "partitioned": is_partitioned(g)}
    if args.t is not None:
        report["t"] = args.t
        report["t_byzantine_partitionable"] = kappa <= args.t
        if args.brute:
            report["brute_force_partitionable"] = byz_partitionable_oracle(g, args.t)
    print(json.dumps(report, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="partdetect", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario config")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a grid of overrides over a base config")
    s.add_argument("--config", required=True)
    s.add_argument("--grid", required=True)
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("topo", help="generate or inspect topologies")
    tsub = t.add_subparsers(dest="topo_command", required=True)
    gen = tsub.add_parser("gen")
    gen.add_argument("--kind", required=True, choices=TOPOLOGY_KINDS + ("drone",))
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--k", type=int)
    gen.add_argument("--d", type=float, default=0.0)
    gen.add_argument("--radius", type=float, default=1.2)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_topo_gen)
    chk = tsub.add_parser("check")
    chk.add_argument("--graph", required=True)
    chk.add_argument("--t", type=int)
    chk.add_argument("--brute", action="store_true", help="also run subset enumeration (small n)")
    chk.set_defaults(func=cmd_topo_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ConfigError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
