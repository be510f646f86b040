"""Reachability-gossip baselines: MtG (Bloom filters) and MtGv2 (signed IDs).

Neither is Byzantine-resilient; they exist for comparison. Both flood for a
fixed epoch and then decide NOT_PARTITIONABLE iff every node ID was heard of.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable

from .crypto import KeyDirectory, KeyPair, SignedID, sign_id, verify_id
from .nectar import Decision, ProtocolError, Verdict

__all__ = [
    "BloomFilter",
    "MtGNode",
    "MtGv2Node",
    "mtg_step",
    "mtg_decide",
    "mtgv2_step",
    "mtgv2_decide",
    "bloom_key",
]

DEFAULT_BITS = 256
DEFAULT_HASHES = 4


def bloom_key(seed: int) -> bytes:
    return hashlib.sha256(b"partdetect/bloom" + int(seed).to_bytes(8, "big", signed=True)).digest()[:16]


def _positions(node: int, m: int, h: int, key: bytes) -> tuple[int, ...]:
    data = int(node).to_bytes(4, "big")
    h1 = int.from_bytes(hashlib.blake2b(data, key=key + b"\x01", digest_size=8).digest(), "big")
    h2 = int.from_bytes(hashlib.blake2b(data, key=key + b"\x02", digest_size=8).digest(), "big")
    h2 |= 1
    return tuple((h1 + j * h2) % m for j in range(h))


@dataclass(frozen=True)
class BloomFilter:
    """Immutable Bloom filter over node IDs, bits packed into an int."""

    m: int = DEFAULT_BITS
    h: int = DEFAULT_HASHES
    key: bytes = b""
    bits: int = 0

    def add(self, node: int) -> "BloomFilter":
        bits = self.bits
        for p in _positions(node, self.m, self.h, self.key):
            bits |= 1 << p
        return BloomFilter(self.m, self.h, self.key, bits)

    def __contains__(self, node: int) -> bool:
        return all(self.bits >> p & 1 for p in _positions(node, self.m, self.h, self.key))

    def compatible(self, other) -> bool:
        return (
            isinstance(other, BloomFilter)
            and other.m == self.m
            and other.h == self.h
            and other.key == self.key
            and isinstance(other.bits, int)
            and 0 <= other.bits < (1 << self.m)
        )

    def __or__(self, other: "BloomFilter") -> "BloomFilter":
        return BloomFilter(self.m, self.h, self.key, self.bits | other.bits)

    @classmethod
    def all_ones(cls, m: int = DEFAULT_BITS, h: int = DEFAULT_HASHES, key: bytes = b"") -> "BloomFilter":
        return cls(m, h, key, (1 << m) - 1)

    def encode(self) -> bytes:
        return self.bits.to_bytes((self.m + 7) // 8, "big")

    def wire_size(self, sig_len: int = 0) -> int:
        return (self.m + 7) // 8


class MtGNode:
    def __init__(
        self,
        self_id: int,
        n: int,
        neighbors: Iterable[int],
        epoch_len: int | None = None,
        m: int = DEFAULT_BITS,
        h: int = DEFAULT_HASHES,
        key: bytes = b"",
        include_self: bool = True,
    ):
        self.self_id = self_id
        self.n = n
        self.neighbors = tuple(sorted(neighbors))
        self.epoch_len = n - 1 if epoch_len is None else epoch_len
        empty = BloomFilter(m, h, key)
        self.filter = empty.add(self_id) if include_self else empty
        self.round = 0
        self.decision: Decision | None = None

    def round_outgoing(self, rnd: int):
        if rnd != self.round + 1 or rnd > self.epoch_len:
            raise ProtocolError(f"MtG node {self.self_id}: round {rnd} after {self.round}")
        self.round = rnd
        return [(self.neighbors, self.filter)] if self.neighbors else []

    def on_receive(self, payload, sender: int, rnd: int) -> None:
        if self.filter.compatible(payload):
            self.filter = self.filter | payload

    def decide(self) -> Decision:
        if self.decision is None:
            self.decision = Decision(mtg_decide(self))
        return self.decision


def mtg_step(s: MtGNode, inbound: Iterable[BloomFilter], rnd: int):
    """Merge ``inbound`` into the node's filter, then emit it to every neighbour."""
    for f in inbound:
        s.on_receive(f, -1, rnd)
    return s.round_outgoing(rnd)


def mtg_decide(s: MtGNode) -> Verdict:
    if all(i in s.filter for i in range(s.n)):
        return Verdict.NOT_PARTITIONABLE
    return Verdict.PARTITIONABLE


class MtGv2Node:
    def __init__(
        self,
        self_id: int,
        n: int,
        neighbors: Iterable[int],
        keypair: KeyPair,
        directory: KeyDirectory,
        epoch_len: int | None = None,
        include_self: bool = True,
    ):
        self.self_id = self_id
        self.n = n
        self.neighbors = tuple(sorted(neighbors))
        self._dir = directory
        self.epoch_len = n - 1 if epoch_len is None else epoch_len
        self.collected: dict[int, SignedID] = {}
        if include_self:
            self.collected[self_id] = sign_id(keypair)
        # neighbour -> IDs it already has from us (or sent to us)
        self.sent_log: dict[int, set[int]] = {j: set() for j in self.neighbors}
        self.round = 0
        self.decision: Decision | None = None

    def round_outgoing(self, rnd: int):
        if rnd != self.round + 1 or rnd > self.epoch_len:
            raise ProtocolError(f"MtGv2 node {self.self_id}: round {rnd} after {self.round}")
        self.round = rnd
        out = []
        for node in sorted(self.collected):
            dests = tuple(j for j in self.neighbors if node not in self.sent_log[j])
            if dests:
                for j in dests:
                    self.sent_log[j].add(node)
                out.append((dests, self.collected[node]))
        return out

    def on_receive(self, payload, sender: int, rnd: int) -> None:
        if type(payload) is not SignedID or sender not in self.sent_log:
            return
        if not isinstance(payload.node, int) or not 0 <= payload.node < self.n:
            return
        if not verify_id(payload, self._dir):
            return
        self.sent_log[sender].add(payload.node)
        self.collected.setdefault(payload.node, payload)

    def decide(self) -> Decision:
        if self.decision is None:
            self.decision = Decision(mtgv2_decide(self))
        return self.decision


def mtgv2_step(s: MtGv2Node, inbound: Iterable[SignedID], rnd: int, sender: int | None = None):
    """Verify and collect ``inbound``, then forward unsent IDs.

    ``sender`` attributes inbound IDs to a neighbour (suppressing echoes);
    without it they are only collected.
    """
    for sid in inbound:
        if sender is None:
            if type(sid) is SignedID and 0 <= sid.node < s.n and verify_id(sid, s._dir):
                s.collected.setdefault(sid.node, sid)
        else:
            s.on_receive(sid, sender, rnd)
    return s.round_outgoing(rnd)


def mtgv2_decide(s: MtGv2Node) -> Verdict:
    if len(s.collected) == s.n:
        return Verdict.NOT_PARTITIONABLE
    return Verdict.PARTITIONABLE
