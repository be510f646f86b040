"""Static undirected topologies, generators and connectivity oracles.

Node IDs are always ``0..n-1``. A :class:`Graph` is immutable and hashable,
so connectivity results can be memoised on it.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import combinations
from pathlib import Path
from typing import Iterable

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

__all__ = [
    "Graph",
    "DroneParams",
    "GraphError",
    "GenerationError",
    "EnumerationBudgetError",
    "TOPOLOGY_KINDS",
    "gen_topology",
    "gen_drone",
    "gen_bridge_attack",
    "vertex_connectivity",
    "is_partitioned",
    "byz_partitionable_oracle",
    "reachable_component",
    "components",
    "induced",
    "read_graph",
    "write_graph",
    "wheel",
    "drone_positions",
]


class GraphError(ValueError):
    """Invalid graph or generator parameters."""


class GenerationError(RuntimeError):
    """A randomized generator ran out of retries."""


class EnumerationBudgetError(RuntimeError):
    """Brute-force enumeration would exceed its budget."""


def _norm(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 0:
            raise GraphError(f"node count must be >= 0, got {self.n}")
        for u, v in self.edges:
            if not (0 <= u < v < self.n):
                raise GraphError(f"edge ({u}, {v}) is not canonical or out of range for n={self.n}")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        norm = set()
        for u, v in edges:
            if u == v:
                raise GraphError(f"self-loop on node {u}")
            norm.add(_norm(int(u), int(v)))
        return cls(n, frozenset(norm))

    @cached_property
    def adj(self) -> tuple[frozenset[int], ...]:
        nbrs: list[set[int]] = [set() for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].add(v)
            nbrs[v].add(u)
        return tuple(frozenset(s) for s in nbrs)

    def neighbors(self, u: int) -> frozenset[int]:
        return self.adj[u]

    def degree(self, u: int) -> int:
        return len(self.adj[u])

    def has_edge(self, u: int, v: int) -> bool:
        return u != v and _norm(u, v) in self.edges

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def is_complete(self) -> bool:
        return self.m == self.n * (self.n - 1) // 2

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g

    def to_text(self) -> str:
        lines = [f"{self.n} {self.m}"]
        lines.extend(f"{u} {v}" for u, v in sorted(self.edges))
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()


@dataclass(frozen=True)
class DroneParams:
    n: int
    d: float
    radius: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise GraphError("drone scenario needs n >= 2")
        if self.radius <= 0:
            raise GraphError("radius must be > 0")
        if self.d < 0:
            raise GraphError("barycenter distance must be >= 0")


# --------------------------------------------------------------------------
# Structural queries


def components(g: Graph) -> list[frozenset[int]]:
    seen = [False] * g.n
    out = []
    for s in range(g.n):
        if seen[s]:
            continue
        seen[s] = True
        stack = [s]
        comp = [s]
        while stack:
            u = stack.pop()
            for w in g.adj[u]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
                    comp.append(w)
        out.append(frozenset(comp))
    return out


def reachable_component(g: Graph, start: int) -> frozenset[int]:
    """Connected component of ``start`` (including ``start``)."""
    if not 0 <= start < g.n:
        raise GraphError(f"start node {start} out of range for n={g.n}")
    seen = {start}
    stack = [start]
    adj = g.adj
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return frozenset(seen)


def is_partitioned(g: Graph) -> bool:
    """True iff ``g`` has at least two connected components."""
    if g.n < 2:
        return False
    return len(reachable_component(g, 0)) < g.n


def induced(g: Graph, keep: Iterable[int]) -> Graph:
    """Subgraph induced by ``keep``, relabelled to ``0..len(keep)-1`` in ascending order."""
    nodes = sorted(set(keep))
    index = {v: i for i, v in enumerate(nodes)}
    edges = frozenset(
        (index[u], index[v]) for u, v in g.edges if u in index and v in index
    )
    return Graph(len(nodes), edges)


# --------------------------------------------------------------------------
# Vertex connectivity


def _split_network(g: Graph) -> csr_matrix:
    # v_in = v, v_out = v + n; unit capacity inside each vertex, n on edges
    n = g.n
    rows, cols, caps = [], [], []
    for v in range(n):
        rows.append(v)
        cols.append(v + n)
        caps.append(1)
    for u, v in g.edges:
        rows += [u + n, v + n]
        cols += [v, u]
        caps += [n, n]
    return csr_matrix(
        (np.asarray(caps, dtype=np.int32), (np.asarray(rows), np.asarray(cols))),
        shape=(2 * n, 2 * n),
    )


@lru_cache(maxsize=4096)
def vertex_connectivity(g: Graph) -> int:
    """Size of a smallest vertex cut; ``n-1`` for complete graphs, 0 if disconnected.

    Local connectivities come from max-flow on the node-split network. Only
    the pairs of the Esfahanian-Hakimi dominating scheme are tried: a
    minimum-degree vertex ``v`` against each of its non-neighbours, and each
    non-adjacent pair inside ``N(v)``.
    """
    n = g.n
    if n <= 1 or is_partitioned(g):
        return 0
    if g.is_complete:
        return n - 1

    net = _split_network(g)
    adj = g.adj

    def local(s: int, t: int) -> int:
        return int(maximum_flow(net, s + n, t, method="dinic").flow_value)

    v = min(range(n), key=lambda x: (len(adj[x]), x))
    best = len(adj[v])
    for w in range(n):
        if w != v and w not in adj[v]:
            best = min(best, local(v, w))
            if best == 0:
                return 0
    for x, y in combinations(sorted(adj[v]), 2):
        if y not in adj[x]:
            best = min(best, local(x, y))
    return best


def byz_partitionable_oracle(g: Graph, t: int, budget: int = 2_000_000) -> bool:
    """Brute force: does removing some set of at most ``t`` nodes partition the rest?

    Enumerates every subset up to size ``t``; meant for small graphs (n <= 12).
    """
    if not 0 <= t < max(g.n, 1):
        raise GraphError(f"t must satisfy 0 <= t < n (t={t}, n={g.n})")
    total = sum(math.comb(g.n, s) for s in range(t + 1))
    if total > budget:
        raise EnumerationBudgetError(
            f"{total} subsets exceed the enumeration budget of {budget}"
        )
    nodes = range(g.n)
    for size in range(t + 1):
        for removed in combinations(nodes, size):
            rest = set(nodes).difference(removed)
            if is_partitioned(induced(g, rest)):
                return True
    return False


# --------------------------------------------------------------------------
# Generators

TOPOLOGY_KINDS = (
    "k-regular",
    "k-pasted-tree",
    "k-diamond",
    "generalized-wheel",
    "multipartite-wheel",
)

MAX_REGULAR_TRIES = 50


def gen_topology(kind: str, n: int, k: int, seed: int = 0) -> Graph:
    """Generate a graph of family ``kind`` with vertex connectivity at least ``k``."""
    if kind not in TOPOLOGY_KINDS:
        raise GraphError(f"unknown topology kind {kind!r}; expected one of {TOPOLOGY_KINDS}")
    if k < 1:
        raise GraphError("k must be >= 1")
    if kind == "k-regular":
        return _k_regular(n, k, seed)
    if kind == "k-pasted-tree":
        return _cluster_graph(n, k, _tree_links)
    if kind == "k-diamond":
        return _cluster_graph(n, k, _diamond_links)
    # hub of k-2 nodes plus a rim cycle of >= 3 gives kappa = k
    hub = max(1, k - 2)
    if n - hub < 3:
        raise GraphError(f"wheel needs a rim of >= 3 nodes (n={n}, k={k})")
    return wheel(n, hub, part_size=1 if kind == "generalized-wheel" else 2)


def _k_regular(n: int, k: int, seed: int) -> Graph:
    if not k < n:
        raise GraphError(f"k-regular needs k < n (k={k}, n={n})")
    if (n * k) % 2:
        raise GraphError(f"k-regular needs n*k even (n={n}, k={k})")
    rng = random.Random(seed)
    for _ in range(MAX_REGULAR_TRIES):
        h = nx.random_regular_graph(k, n, seed=rng.randrange(2**32))
        g = Graph.from_edges(n, h.edges())
        if vertex_connectivity(g) == k:
            return g
    raise GenerationError(
        f"no {k}-connected {k}-regular graph on {n} nodes after {MAX_REGULAR_TRIES} tries"
    )


def _cluster_graph(n: int, k: int, links) -> Graph:
    # Groups of >= k nodes, each a clique; adjacent groups joined by a
    # k-edge matching. Removing < k nodes leaves every group non-empty and
    # every matching with a surviving edge, hence kappa >= k.
    if n < k + 1:
        raise GraphError(f"need n >= k+1 (n={n}, k={k})")
    g_count = max(1, n // k)
    sizes = [n // g_count] * g_count
    for i in range(n % g_count):
        sizes[i] += 1
    groups, start = [], 0
    for s in sizes:
        groups.append(list(range(start, start + s)))
        start += s
    edges = set()
    for grp in groups:
        edges.update(combinations(grp, 2))
    for a, b in links(g_count):
        ga, gb = groups[a], groups[b]
        off = (a + b) % len(ga)
        for i in range(k):
            edges.add(_norm(ga[(off + i) % len(ga)], gb[(off + i) % len(gb)]))
    return Graph.from_edges(n, edges)


def _tree_links(count: int) -> list[tuple[int, int]]:
    return [((i - 1) // 2, i) for i in range(1, count)]


def _diamond_links(count: int) -> list[tuple[int, int]]:
    # Binary tree on the first half, mirrored tree on the second half, leaves
    # of both halves pasted pairwise: widening levels then narrowing levels.
    if count < 4:
        return _tree_links(count)
    top = (count + 1) // 2
    bottom = count - top
    links = [((i - 1) // 2, i) for i in range(1, top)]
    links += [(top + (i - 1) // 2, top + i) for i in range(1, bottom)]
    top_leaves = [i for i in range(top) if 2 * i + 1 >= top]
    bottom_leaves = [top + i for i in range(bottom) if 2 * i + 1 >= bottom]
    for j, leaf in enumerate(top_leaves):
        links.append((leaf, bottom_leaves[j % len(bottom_leaves)]))
    for j, leaf in enumerate(bottom_leaves[len(top_leaves):]):
        links.append((top_leaves[j % len(top_leaves)], leaf))
    return links


def wheel(n: int, hub: int, part_size: int = 1) -> Graph:
    """Hub nodes ``0..hub-1`` fully joined to a cycle on the remaining nodes.

    The hub is a clique when ``part_size`` is 1, otherwise a complete
    multipartite graph with parts of ``part_size`` consecutive IDs. A rim of
    two nodes degenerates to a single edge.
    """
    rim = n - hub
    if hub < 1 or rim < 2 or part_size < 1:
        raise GraphError(f"wheel needs hub >= 1 and a rim of >= 2 nodes (n={n}, hub={hub})")
    edges = set()
    for a, b in combinations(range(hub), 2):
        if a // part_size != b // part_size:
            edges.add((a, b))
    rim_nodes = list(range(hub, n))
    for i, u in enumerate(rim_nodes):
        edges.add(_norm(u, rim_nodes[(i + 1) % rim]))
        for h in range(hub):
            edges.add((h, u))
    return Graph.from_edges(n, edges)


def _disc_points(rng: np.random.Generator, count: int, cx: float) -> np.ndarray:
    r = np.sqrt(rng.random(count))
    theta = rng.random(count) * 2 * np.pi
    return np.column_stack((cx + r * np.cos(theta), r * np.sin(theta)))


def drone_positions(params: DroneParams) -> np.ndarray:
    rng = np.random.default_rng(params.seed)
    first = (params.n + 1) // 2
    return np.vstack(
        (_disc_points(rng, first, 0.0), _disc_points(rng, params.n - first, params.d))
    )


def gen_drone(params: DroneParams) -> Graph:
    """Two uniform unit-disc scatters at distance ``d``; edge iff distance <= radius."""
    pts = drone_positions(params)
    diff = pts[:, None, :] - pts[None, :, :]
    close = np.hypot(diff[..., 0], diff[..., 1]) <= params.radius
    iu, ju = np.nonzero(np.triu(close, k=1))
    return Graph.from_edges(params.n, zip(iu.tolist(), ju.tolist()))


MAX_SIDE_TRIES = 200


def _connected_gnp(count: int, p: float, rng: random.Random) -> set[tuple[int, int]]:
    for _ in range(MAX_SIDE_TRIES):
        edges = {(a, b) for a, b in combinations(range(count), 2) if rng.random() < p}
        if not is_partitioned(Graph(count, frozenset(edges))):
            return edges
    raise GenerationError(
        f"could not draw a connected side of {count} nodes at density {p} "
        f"within {MAX_SIDE_TRIES} tries"
    )


def gen_bridge_attack(
    n_correct_1: int,
    n_correct_2: int,
    byz: int,
    intra_density: float = 0.3,
    seed: int = 0,
) -> tuple[Graph, frozenset[int]]:
    """Two connected correct sides bridged only through ``byz`` Byzantine nodes.

    Nodes ``0..n1-1`` form side one, the next ``n2`` side two, and the last
    ``byz`` IDs are Byzantine. Each Byzantine node has at least one neighbour
    on each side; Byzantine nodes are linked to each other at the same density.
    """
    if n_correct_1 < 1 or n_correct_2 < 1:
        raise GraphError("each correct side needs at least one node")
    if byz < 1:
        raise GraphError("bridge attack needs at least one Byzantine node")
    if not 0 < intra_density <= 1:
        raise GraphError("intra_density must be in (0, 1]")
    rng = random.Random(seed)
    n1, n2 = n_correct_1, n_correct_2
    side1 = list(range(n1))
    side2 = list(range(n1, n1 + n2))
    bad = list(range(n1 + n2, n1 + n2 + byz))
    edges = set(_connected_gnp(n1, intra_density, rng))
    edges |= {(a + n1, b + n1) for a, b in _connected_gnp(n2, intra_density, rng)}
    for b in bad:
        for side in (side1, side2):
            picked = [c for c in side if rng.random() < intra_density]
            if not picked:
                picked = [rng.choice(side)]
            edges.update((c, b) for c in picked)
    for a, b in combinations(bad, 2):
        if rng.random() < intra_density:
            edges.add((a, b))
    return Graph.from_edges(n1 + n2 + byz, edges), frozenset(bad)


# --------------------------------------------------------------------------
# File format: "n m" header, then m lines "u v" with u < v; '#' comments.


def read_graph(path: str | Path) -> Graph:
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows:
        raise GraphError(f"{path}: empty graph file")
    n, m = (int(x) for x in rows[0])
    body = rows[1:]
    if len(body) != m:
        raise GraphError(f"{path}: header declares {m} edges, found {len(body)}")
    return Graph.from_edges(n, ((int(u), int(v)) for u, v in body))


def write_graph(g: Graph, path: str | Path) -> None:
    Path(path).write_text(g.to_text())
