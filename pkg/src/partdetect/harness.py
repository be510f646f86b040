"""Scenario configuration, repeated runs, sweeps and CSV emission."""

from __future__ import annotations

import copy
import csv
import io
import itertools
import json
import logging
import math
import os
import random
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .adversary import AdversaryContext, ConfigurationError, Protocol, Strategy, make_adversary
from .baselines import MtGNode, MtGv2Node, bloom_key
from .crypto import SIG_LEN, edge_proofs, keygen, make_directory
from .graph import (
    TOPOLOGY_KINDS,
    DroneParams,
    Graph,
    gen_bridge_attack,
    gen_drone,
    gen_topology,
    read_graph,
)
from .nectar import NectarNode, Verdict
from .simnet import ACCOUNTING_MODES, Transcript, expected_verdict, measure, run

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "SweepResult",
    "RunRecord",
    "build_graph",
    "build_nodes",
    "execute_repetition",
    "run_scenario",
    "sweep",
    "expand_grid",
    "RAW_COLUMNS",
    "AGGREGATE_COLUMNS",
    "WORKERS_ENV",
]

log = logging.getLogger(__name__)

WORKERS_ENV = "PARTDETECT_WORKERS"
RAW_COLUMNS = (
    "scenario_id",
    "seed",
    "protocol",
    "node",
    "is_byzantine",
    "bytes_sent",
    "verdict",
    "confirmed",
)
AGGREGATE_COLUMNS = (
    "scenario_id",
    "protocol",
    "repetitions",
    "mean_bytes",
    "ci95_bytes",
    "mean_max_bytes",
    "mean_success",
    "ci95_success",
    "agreement_rate",
)


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


_TOPO_EXTRA = ("drone", "bridge", "star", "file")


@dataclass
class ScenarioConfig:
    protocol: Protocol
    topology: dict
    t: int | None = None
    byzantine: dict | None = None
    strategy: Any = "SILENT"
    repetitions: int = 50
    seed: int = 0
    output: str | None = None
    id: str = "scenario"
    sig_len: int = SIG_LEN
    accounting: str = "multicast"
    bloom_bits: int = 256
    bloom_hashes: int = 4
    epoch: int | None = None
    key_provider: str = "tag"
    expected: Verdict | None = None

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ScenarioConfig":
        if not isinstance(raw, Mapping):
            raise ConfigError("$", "config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"$.{sorted(unknown)[0]}", "unknown field")
        d = dict(raw)
        try:
            d["protocol"] = Protocol(str(d.get("protocol", "")).upper())
        except ValueError:
            raise ConfigError("$.protocol", f"expected one of {[p.value for p in Protocol]}")
        if "topology" not in d:
            raise ConfigError("$.topology", "missing")
        if d.get("expected") is not None:
            try:
                d["expected"] = Verdict(str(d["expected"]).upper())
            except ValueError:
                raise ConfigError("$.expected", "expected NOT_PARTITIONABLE or PARTITIONABLE")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["protocol"] = self.protocol.value
        d["expected"] = self.expected.value if self.expected else None
        return d

    def validate(self) -> None:
        topo = self.topology
        if not isinstance(topo, Mapping):
            raise ConfigError("$.topology", "must be an object")
        kind = topo.get("kind", "file" if "file" in topo else None)
        if kind not in TOPOLOGY_KINDS + _TOPO_EXTRA:
            raise ConfigError("$.topology.kind", f"unknown kind {kind!r}")
        if kind == "file" and "file" not in topo:
            raise ConfigError("$.topology.file", "missing graph file path")
        if kind != "file":
            if not isinstance(topo.get("n"), int) or topo["n"] < 1:
                raise ConfigError("$.topology.n", "must be a positive integer")
        if kind in TOPOLOGY_KINDS and not isinstance(topo.get("k"), int):
            raise ConfigError("$.topology.k", "must be an integer")
        if kind == "drone":
            for f in ("d", "radius"):
                if not isinstance(topo.get(f), (int, float)):
                    raise ConfigError(f"$.topology.{f}", "must be a number")
        if kind == "bridge":
            if not isinstance(topo.get("byz"), int) or topo["byz"] < 1:
                raise ConfigError("$.topology.byz", "must be an integer >= 1")
            if topo["n"] - topo["byz"] < 2:
                raise ConfigError("$.topology.n", "bridge needs at least two correct nodes")
        if not isinstance(self.repetitions, int) or self.repetitions < 1:
            raise ConfigError("$.repetitions", "must be an integer >= 1")
        if not isinstance(self.seed, int):
            raise ConfigError("$.seed", "must be an integer")
        if self.accounting not in ACCOUNTING_MODES:
            raise ConfigError("$.accounting", f"expected one of {ACCOUNTING_MODES}")
        if self.key_provider not in ("tag", "ed25519"):
            raise ConfigError("$.key_provider", "expected 'tag' or 'ed25519'")
        if not isinstance(self.sig_len, int) or self.sig_len < 1:
            raise ConfigError("$.sig_len", "must be a positive integer")
        if self.t is not None and (not isinstance(self.t, int) or self.t < 0):
            raise ConfigError("$.t", "must be a non-negative integer")
        byz = self.byzantine
        if byz is not None:
            if not isinstance(byz, Mapping) or not ({"ids", "random"} & set(byz)):
                raise ConfigError("$.byzantine", "expected {'ids': [...]} or {'random': count}")
            if "ids" in byz:
                n = topo.get("n")
                for i, x in enumerate(byz["ids"]):
                    if not isinstance(x, int) or x < 0 or (n is not None and x >= n):
                        raise ConfigError(f"$.byzantine.ids[{i}]", "not a valid node ID")
            if "random" in byz and (not isinstance(byz["random"], int) or byz["random"] < 0):
                raise ConfigError("$.byzantine.random", "must be a non-negative integer")
        count = self._byz_count()
        if self.protocol is Protocol.NECTAR and self.t is not None and count is not None and count > self.t:
            raise ConfigError("$.t", f"{count} Byzantine nodes exceed t={self.t}")
        try:
            self._strategy_for(None)
        except (ValueError, KeyError) as exc:
            raise ConfigError("$.strategy", str(exc))

    def _byz_count(self) -> int | None:
        if self.byzantine is not None:
            if "ids" in self.byzantine:
                return len(set(self.byzantine["ids"]))
            return self.byzantine["random"]
        if self.topology.get("kind") == "bridge":
            return self.topology["byz"]
        return 0

    def _strategy_for(self, node: int | None) -> Strategy:
        chosen = self.strategy
        if isinstance(chosen, Mapping) and "per_node" in chosen:
            table = chosen["per_node"]
            default = chosen.get("default", "SILENT")
            if node is None:
                for v in table.values():
                    Strategy.parse(v)
                return Strategy.parse(default)
            return Strategy.parse(table.get(str(node), table.get(node, default)))
        return Strategy.parse(chosen)


@dataclass
class RunRecord:
    graph: Graph
    byzantine: frozenset[int]
    t: int
    seed: int
    transcript: Transcript
    nodes: list
    expected: Verdict | None


@dataclass
class SweepResult:
    scenario_id: str
    protocol: str
    repetitions: int
    mean_bytes: float
    ci95_bytes: float
    mean_max_bytes: float
    mean_success: float | None
    ci95_success: float | None
    agreement_rate: float
    per_run_bytes: list[float] = field(default_factory=list)
    per_run_success: list[float | None] = field(default_factory=list)
    per_run_agreement: list[bool] = field(default_factory=list)

    def row(self) -> dict:
        return {c: getattr(self, c) for c in AGGREGATE_COLUMNS}


def _ci95(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    return 1.96 * statistics.stdev(values) / math.sqrt(len(values))


def build_graph(cfg: ScenarioConfig, seed: int) -> tuple[Graph, frozenset[int] | None]:
    """Graph for one repetition, plus the Byzantine set when the topology fixes it."""
    topo = cfg.topology
    kind = topo.get("kind", "file")
    if kind == "file":
        return read_graph(topo["file"]), None
    n = topo["n"]
    if kind in TOPOLOGY_KINDS:
        return gen_topology(kind, n, topo["k"], seed), None
    if kind == "drone":
        return gen_drone(DroneParams(n, float(topo["d"]), float(topo["radius"]), seed)), None
    if kind == "star":
        return Graph.from_edges(n, ((0, j) for j in range(1, n))), None
    # bridge: explicit side sizes, or each correct node joins a side by coin flip
    byz = topo["byz"]
    correct = n - byz
    if "n_correct_1" in topo:
        n1 = topo["n_correct_1"]
        n2 = topo.get("n_correct_2", correct - n1)
    else:
        rng = random.Random(f"bridge-split/{seed}")
        n1 = 1 + sum(rng.random() < 0.5 for _ in range(correct - 2))
        n2 = correct - n1
    return gen_bridge_attack(n1, n2, byz, float(topo.get("density", 0.3)), seed)


def _place_byzantine(cfg: ScenarioConfig, g: Graph, fixed: frozenset[int] | None, seed: int) -> frozenset[int]:
    byz = cfg.byzantine
    if byz is not None and "ids" in byz:
        return frozenset(byz["ids"])
    if byz is not None and "random" in byz:
        rng = random.Random(f"placement/{seed}")
        return frozenset(rng.sample(range(g.n), byz["random"]))
    return fixed if fixed is not None else frozenset()


def build_nodes(
    protocol: Protocol,
    g: Graph,
    byzantine: frozenset[int],
    t: int,
    strategies: Mapping[int, Strategy],
    seed: int,
    *,
    key_provider: str = "tag",
    epoch: int | None = None,
    bloom_bits: int = 256,
    bloom_hashes: int = 4,
) -> list:
    """Correct nodes for everyone outside ``byzantine``; adversaries inside it."""
    protocol = Protocol(protocol)
    keys = {i: keygen(i, seed, key_provider) for i in range(g.n)}
    directory = make_directory(keys)
    bkey = bloom_key(seed)
    proofs = edge_proofs(g.edges, keys) if protocol is not Protocol.MTG else {}
    ctx = AdversaryContext(
        graph=g,
        byzantine=byzantine,
        t=t,
        keys={b: keys[b] for b in byzantine},
        directory=directory,
        proofs={e: p for e, p in proofs.items() if e[0] in byzantine or e[1] in byzantine},
        epoch_len=epoch,
        bloom_m=bloom_bits,
        bloom_h=bloom_hashes,
        bloom_key=bkey,
    )
    nodes = []
    for i in range(g.n):
        if i in byzantine:
            nodes.append(make_adversary(protocol, strategies[i], keys[i], ctx))
            continue
        nbrs = g.neighbors(i)
        if protocol is Protocol.NECTAR:
            own = {j: proofs[(min(i, j), max(i, j))] for j in nbrs}
            nodes.append(NectarNode(g.n, t, i, nbrs, own, keys[i], directory))
        elif protocol is Protocol.MTG:
            nodes.append(MtGNode(i, g.n, nbrs, epoch, bloom_bits, bloom_hashes, bkey))
        else:
            nodes.append(MtGv2Node(i, g.n, nbrs, keys[i], directory, epoch))
    return nodes


def execute_repetition(cfg: ScenarioConfig, rep: int, record: bool = False) -> RunRecord:
    seed = cfg.seed + rep
    g, fixed = build_graph(cfg, seed)
    byz = _place_byzantine(cfg, g, fixed, seed)
    if any(b >= g.n for b in byz):
        raise ConfigError("$.byzantine", f"Byzantine IDs out of range for n={g.n}")
    t = cfg.t if cfg.t is not None else len(byz)
    if cfg.protocol is Protocol.NECTAR and len(byz) > t:
        raise ConfigError("$.t", f"{len(byz)} Byzantine nodes exceed t={t}")
    strategies = {b: cfg._strategy_for(b) for b in byz}
    nodes = build_nodes(
        cfg.protocol, g, byz, t, strategies, seed,
        key_provider=cfg.key_provider, epoch=cfg.epoch,
        bloom_bits=cfg.bloom_bits, bloom_hashes=cfg.bloom_hashes,
    )
    if cfg.protocol is Protocol.NECTAR:
        rounds = g.n - 1
    else:
        rounds = cfg.epoch if cfg.epoch is not None else g.n - 1
    expected = cfg.expected if cfg.expected is not None else expected_verdict(g, byz, t)
    tr = run(
        g, nodes, rounds, seed,
        byzantine=byz, t=t, sig_len=cfg.sig_len, accounting=cfg.accounting,
        record=record, expected=expected,
    )
    return RunRecord(g, byz, t, seed, tr, nodes, expected)


def _rep_rows(cfg: ScenarioConfig, rep: int) -> tuple[list[dict], dict]:
    rec = execute_repetition(cfg, rep)
    m = measure(rec.transcript)
    rows = []
    for i in range(rec.graph.n):
        d = rec.transcript.decisions.get(i)
        rows.append({
            "scenario_id": cfg.id,
            "seed": rec.seed,
            "protocol": cfg.protocol.value,
            "node": i,
            "is_byzantine": int(i in rec.byzantine),
            "bytes_sent": rec.transcript.bytes_sent[i],
            "verdict": d.verdict.value if d is not None else "",
            "confirmed": int(bool(d.confirmed)) if d is not None else "",
        })
    summary = {
        "mean_bytes": m.mean_bytes,
        "max_bytes": m.max_bytes,
        "success": m.success_rate,
        "agreement": m.agreement,
        "graph_digest": rec.graph.digest(),
    }
    return rows, summary


def _rep_task(args):
    cfg_dict, rep = args
    return _rep_rows(ScenarioConfig.from_dict(cfg_dict), rep)


def _workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _write_csv(path: Path, columns, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path | None = None, workers: int | None = None):
    """Run ``cfg.repetitions`` seeded repetitions; returns ``(SweepResult, raw_rows)``.

    Repetition ``i`` uses seed ``cfg.seed + i``. When an output directory is
    given (argument or ``cfg.output``) the raw per-node CSV, the aggregate CSV
    and a metadata JSON sidecar are written there.
    """
    tasks = [(cfg.to_dict(), rep) for rep in range(cfg.repetitions)]
    nworkers = _workers(workers)
    if nworkers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=nworkers) as pool:
            results = list(pool.map(_rep_task, tasks))
    else:
        results = [_rep_rows(cfg, rep) for rep in range(cfg.repetitions)]

    raw = [row for rows, _ in results for row in rows]
    summaries = [s for _, s in results]
    per_bytes = [s["mean_bytes"] for s in summaries]
    per_success = [s["success"] for s in summaries]
    known = [s for s in per_success if s is not None]
    result = SweepResult(
        scenario_id=cfg.id,
        protocol=cfg.protocol.value,
        repetitions=cfg.repetitions,
        mean_bytes=statistics.fmean(per_bytes),
        ci95_bytes=_ci95(per_bytes),
        mean_max_bytes=statistics.fmean(s["max_bytes"] for s in summaries),
        mean_success=statistics.fmean(known) if known else None,
        ci95_success=_ci95(known) if known else None,
        agreement_rate=sum(s["agreement"] for s in summaries) / len(summaries),
        per_run_bytes=per_bytes,
        per_run_success=per_success,
        per_run_agreement=[s["agreement"] for s in summaries],
    )

    target = out_dir if out_dir is not None else cfg.output
    if target is not None:
        target = Path(target)
        target.mkdir(parents=True, exist_ok=True)
        _write_csv(target / f"{cfg.id}_raw.csv", RAW_COLUMNS, raw)
        _write_csv(target / f"{cfg.id}_aggregate.csv", AGGREGATE_COLUMNS, [result.row()])
        meta = {
            "config": cfg.to_dict(),
            "graph_digests": [s["graph_digest"] for s in summaries],
            "seeds": [cfg.seed + r for r in range(cfg.repetitions)],
            "byzantine_placement": "seeded uniform" if (cfg.byzantine or {}).get("random") else "fixed",
        }
        (target / f"{cfg.id}_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return result, raw


def _set_path(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
    cur[keys[-1]] = value


def expand_grid(grid) -> list[dict]:
    """A grid is a list of override dicts, or ``{"axes": {path: [values, ...]}}`` (cartesian)."""
    if isinstance(grid, Mapping) and "axes" in grid:
        axes = grid["axes"]
        names = list(axes)
        return [dict(zip(names, combo)) for combo in itertools.product(*(axes[k] for k in names))]
    if isinstance(grid, list):
        return [dict(p) for p in grid]
    raise ConfigError("$grid", "expected a list of overrides or {'axes': {...}}")


def sweep(base: Mapping, grid, out_dir: str | Path | None = None, workers: int | None = None):
    """Run every grid point; returns ``(aggregate_rows, failures)``.

    A failing point is recorded in ``failures`` as ``(index, message)`` and the
    remaining points still run.
    """
    points = expand_grid(grid)
    if not points:
        raise ConfigError("$grid", "grid is empty")
    rows, failures = [], []
    for idx, overrides in enumerate(points):
        raw = copy.deepcopy(dict(base))
        for path, value in overrides.items():
            _set_path(raw, path, value)
        if "id" not in overrides:
            suffix = ",".join(f"{k}={v}" for k, v in overrides.items())
            raw["id"] = f"{base.get('id', 'sweep')}[{suffix}]"
        try:
            cfg = ScenarioConfig.from_dict(raw)
            result, _ = run_scenario(cfg, workers=workers)
        except Exception as exc:
            log.warning("grid point %d failed: %s", idx, exc)
            failures.append((idx, f"{type(exc).__name__}: {exc}"))
            continue
        row = result.row()
        row.update({f"param:{k}": v for k, v in overrides.items()})
        rows.append(row)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(rows_to_csv(rows))
        if failures:
            (out / "failures.json").write_text(json.dumps(failures, indent=2) + "\n")
    return rows, failures


def rows_to_csv(rows: list[dict]) -> str:
    columns = list(AGGREGATE_COLUMNS)
    for r in rows:
        for k in r:
            if k not in columns:
                columns.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()
