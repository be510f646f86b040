"""Byzantine node behaviours for all three protocols.

All Byzantine nodes of a run share one :class:`AdversaryContext`, which
stands in for an out-of-band channel between them: it holds every Byzantine
key pair and the proofs of every edge touching a Byzantine node. Adversaries
never see correct nodes' secret keys, so anything they sign is signed with
Byzantine keys only.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping

from .baselines import BloomFilter, MtGNode, MtGv2Node
from .crypto import (
    ChainedMessage,
    ChainError,
    KeyDirectory,
    KeyPair,
    NeighborhoodProof,
    extend_chain,
    make_proof,
    start_chain,
)
from .graph import Graph, components, induced
from .nectar import NectarNode

__all__ = [
    "Protocol",
    "StrategyKind",
    "Strategy",
    "CatalogEntry",
    "AdversaryContext",
    "ConfigurationError",
    "make_adversary",
    "strategy_catalog",
]


class ConfigurationError(ValueError):
    pass


class Protocol(str, enum.Enum):
    NECTAR = "NECTAR"
    MTG = "MTG"
    MTGV2 = "MTGV2"


class StrategyKind(str, enum.Enum):
    SILENT = "SILENT"
    CORRECT_FACADE = "CORRECT_FACADE"
    ONE_SIDED = "ONE_SIDED"
    ALL_ONES_FILTER = "ALL_ONES_FILTER"
    WITHHOLD_OWN_EDGES = "WITHHOLD_OWN_EDGES"
    FAKE_BYZ_EDGES = "FAKE_BYZ_EDGES"
    STALE_CHAIN_INJECT = "STALE_CHAIN_INJECT"


@dataclass(frozen=True)
class Strategy:
    kind: StrategyKind
    favored: frozenset[int] | None = None
    peers: frozenset[int] | None = None

    @classmethod
    def parse(cls, raw) -> "Strategy":
        if isinstance(raw, Strategy):
            return raw
        if isinstance(raw, str):
            return cls(StrategyKind(raw.upper()))
        if isinstance(raw, Mapping):
            kind = StrategyKind(str(raw["kind"]).upper())
            fav = raw.get("favored")
            peers = raw.get("peers")
            return cls(
                kind,
                frozenset(int(x) for x in fav) if fav is not None else None,
                frozenset(int(x) for x in peers) if peers is not None else None,
            )
        raise ConfigurationError(f"cannot read a strategy from {raw!r}")


@dataclass(frozen=True)
class CatalogEntry:
    kind: StrategyKind
    protocols: frozenset[Protocol]
    doc: str


_ALL = frozenset(Protocol)
_CATALOG = (
    CatalogEntry(StrategyKind.SILENT, _ALL, "Crash-equivalent: never sends anything."),
    CatalogEntry(StrategyKind.CORRECT_FACADE, _ALL, "Runs the correct protocol faithfully."),
    CatalogEntry(
        StrategyKind.ONE_SIDED,
        _ALL,
        "Runs the correct protocol but only sends to the favoured correct nodes "
        "(and to other Byzantine nodes); looks crashed to everyone else.",
    ),
    CatalogEntry(
        StrategyKind.ALL_ONES_FILTER,
        frozenset({Protocol.MTG}),
        "Floods Bloom filters with every bit set.",
    ),
    CatalogEntry(
        StrategyKind.WITHHOLD_OWN_EDGES,
        _ALL,
        "Correct relaying, but never announces or relays anything about itself.",
    ),
    CatalogEntry(
        StrategyKind.FAKE_BYZ_EDGES,
        frozenset({Protocol.NECTAR}),
        "Announces valid proofs for fictitious edges to fellow Byzantine peers.",
    ),
    CatalogEntry(
        StrategyKind.STALE_CHAIN_INJECT,
        frozenset({Protocol.NECTAR}),
        "Correct relaying plus valid chains whose length is wrong for the round.",
    ),
)


def strategy_catalog() -> list[CatalogEntry]:
    return list(_CATALOG)


@dataclass
class AdversaryContext:
    graph: Graph
    byzantine: frozenset[int]
    t: int
    keys: dict[int, KeyPair]
    directory: KeyDirectory
    proofs: dict[tuple[int, int], NeighborhoodProof]
    epoch_len: int | None = None
    bloom_m: int = 256
    bloom_h: int = 4
    bloom_key: bytes = b""
    shared: dict = field(default_factory=dict)

    def __post_init__(self):
        self.byzantine = frozenset(self.byzantine)
        extra = set(self.keys) - self.byzantine
        if extra:
            raise ConfigurationError(f"adversary context holds keys of correct nodes {sorted(extra)}")

    def own_proofs(self, node: int) -> dict[int, NeighborhoodProof]:
        out = {}
        for j in self.graph.neighbors(node):
            e = (node, j) if node < j else (j, node)
            out[j] = self.proofs[e]
        return out

    def default_favored(self) -> frozenset[int]:
        correct = sorted(set(range(self.graph.n)) - self.byzantine)
        if not correct:
            return frozenset()
        comps = components(induced(self.graph, correct))
        first = next(c for c in comps if 0 in c)
        return frozenset(correct[i] for i in first)


class SilentNode:
    def __init__(self, node: int):
        self.self_id = node

    def round_outgoing(self, rnd):
        return []

    def on_receive(self, payload, sender, rnd):
        pass

    def decide(self):
        return None


class _Wrapper:
    """Delegates to an honest node; Byzantine nodes report no decision."""

    def __init__(self, inner):
        self.inner = inner
        self.self_id = inner.self_id

    def round_outgoing(self, rnd):
        return self.inner.round_outgoing(rnd)

    def on_receive(self, payload, sender, rnd):
        self.inner.on_receive(payload, sender, rnd)

    def decide(self):
        return None


class FacadeNode(_Wrapper):
    pass


class OneSidedNode(_Wrapper):
    def __init__(self, inner, allowed: frozenset[int]):
        super().__init__(inner)
        self.allowed = allowed

    def round_outgoing(self, rnd):
        out = []
        for dests, payload in self.inner.round_outgoing(rnd):
            kept = tuple(d for d in dests if d in self.allowed)
            if kept:
                out.append((kept, payload))
        return out


class WithholdNectarNode(_Wrapper):
    def round_outgoing(self, rnd):
        me = self.self_id
        return [(d, m) for d, m in self.inner.round_outgoing(rnd) if me not in m.edge]


class FakeEdgesNectarNode(_Wrapper):
    def __init__(self, inner: NectarNode, key: KeyPair, fakes: list[NeighborhoodProof]):
        super().__init__(inner)
        self._key = key
        self.fakes = fakes

    def round_outgoing(self, rnd):
        out = list(self.inner.round_outgoing(rnd))
        if rnd == 1 and self.inner.neighbors:
            for p in self.fakes:
                out.append((self.inner.neighbors, start_chain(p, self._key)))
        return out


class StaleInjectNectarNode(_Wrapper):
    """Honest relaying, plus chains that are valid but one round too old or too new."""

    def __init__(self, inner: NectarNode, key: KeyPair, own: list[NeighborhoodProof], partner: KeyPair | None):
        super().__init__(inner)
        self._key = key
        self._own = own
        self._partner = partner
        self._heard: dict[int, dict[tuple[int, int], ChainedMessage]] = {}

    def on_receive(self, payload, sender, rnd):
        if type(payload) is ChainedMessage:
            self._heard.setdefault(rnd, {}).setdefault(payload.edge, payload)
        self.inner.on_receive(payload, sender, rnd)

    def _sign_onto(self, msg: ChainedMessage, *keys: KeyPair) -> ChainedMessage | None:
        try:
            for k in keys:
                msg = extend_chain(msg, k)
        except ChainError:
            return None
        return msg

    def round_outgoing(self, rnd):
        out = list(self.inner.round_outgoing(rnd))
        dests = self.inner.neighbors
        if not dests:
            return out
        injected: list[ChainedMessage] = []
        fresh_own = [start_chain(p, self._key) for p in self._own]
        if rnd >= 2:
            injected += fresh_own  # length 1, stale
            injected += list(self._heard.get(rnd - 1, {}).values())  # length rnd-1, stale
        if self._partner is not None:
            if rnd == 1:
                injected += [m for m in (self._sign_onto(c, self._partner) for c in fresh_own) if m]
            else:
                for c in self._heard.get(rnd - 1, {}).values():
                    early = self._sign_onto(c, self._key, self._partner)
                    if early is not None:
                        injected.append(early)  # length rnd+1, early
        out.extend((dests, m) for m in injected if m.length != rnd)
        return out


class AllOnesNode:
    def __init__(self, node: int, neighbors, ctx: AdversaryContext):
        self.self_id = node
        self.neighbors = tuple(sorted(neighbors))
        self.filter = BloomFilter.all_ones(ctx.bloom_m, ctx.bloom_h, ctx.bloom_key)

    def round_outgoing(self, rnd):
        return [(self.neighbors, self.filter)] if self.neighbors else []

    def on_receive(self, payload, sender, rnd):
        pass

    def decide(self):
        return None


def _honest(protocol: Protocol, key: KeyPair, ctx: AdversaryContext, include_self: bool = True):
    node = key.node
    nbrs = ctx.graph.neighbors(node)
    n = ctx.graph.n
    if protocol is Protocol.NECTAR:
        return NectarNode(n, ctx.t, node, nbrs, ctx.own_proofs(node), key, ctx.directory)
    if protocol is Protocol.MTG:
        return MtGNode(
            node, n, nbrs, ctx.epoch_len, ctx.bloom_m, ctx.bloom_h, ctx.bloom_key,
            include_self=include_self,
        )
    return MtGv2Node(node, n, nbrs, key, ctx.directory, ctx.epoch_len, include_self=include_self)


def make_adversary(protocol, strategy, keys: KeyPair, context: AdversaryContext):
    """Build a Byzantine node for ``keys.node`` following ``strategy``."""
    protocol = Protocol(protocol)
    strategy = Strategy.parse(strategy)
    entry = next(e for e in _CATALOG if e.kind is strategy.kind)
    if protocol not in entry.protocols:
        raise ConfigurationError(f"{strategy.kind.value} does not apply to {protocol.value}")
    node = keys.node
    if node not in context.byzantine:
        raise ConfigurationError(f"node {node} is not in the Byzantine set")
    kind = strategy.kind

    if kind is StrategyKind.SILENT:
        return SilentNode(node)
    if kind is StrategyKind.CORRECT_FACADE:
        return FacadeNode(_honest(protocol, keys, context))
    if kind is StrategyKind.ONE_SIDED:
        favored = strategy.favored if strategy.favored is not None else context.default_favored()
        return OneSidedNode(_honest(protocol, keys, context), frozenset(favored) | context.byzantine)
    if kind is StrategyKind.ALL_ONES_FILTER:
        return AllOnesNode(node, context.graph.neighbors(node), context)
    if kind is StrategyKind.WITHHOLD_OWN_EDGES:
        if protocol is Protocol.NECTAR:
            return WithholdNectarNode(_honest(protocol, keys, context))
        return FacadeNode(_honest(protocol, keys, context, include_self=False))
    if kind is StrategyKind.FAKE_BYZ_EDGES:
        peers = strategy.peers if strategy.peers is not None else context.byzantine - {node}
        if not set(peers) <= context.byzantine:
            raise ConfigurationError("FAKE_BYZ_EDGES peers must all be Byzantine")
        fakes = [
            make_proof(keys, context.keys[p])
            for p in sorted(peers)
            if p != node and not context.graph.has_edge(node, p)
        ]
        return FakeEdgesNectarNode(_honest(protocol, keys, context), keys, fakes)
    # STALE_CHAIN_INJECT
    own = list(context.own_proofs(node).values())
    others = sorted(context.byzantine - {node})
    partner = context.keys[others[0]] if others else None
    return StaleInjectNectarNode(_honest(protocol, keys, context), keys, own, partner)
