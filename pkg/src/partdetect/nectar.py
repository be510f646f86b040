"""NECTAR node state machine.

A node starts from its own neighbourhood proofs, floods every edge it learns
as a signature chain for ``n-1`` synchronous rounds, and finally estimates
reachability and vertex connectivity of the graph it discovered.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping

from .crypto import (
    ChainedMessage,
    KeyDirectory,
    KeyPair,
    NeighborhoodProof,
    extend_chain,
    start_chain,
    verify_chain,
    verify_proof,
)
from .graph import Graph, induced, reachable_component, vertex_connectivity

__all__ = ["Verdict", "Decision", "ProtocolError", "NectarNode"]


class Verdict(str, enum.Enum):
    NOT_PARTITIONABLE = "NOT_PARTITIONABLE"
    PARTITIONABLE = "PARTITIONABLE"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Decision:
    verdict: Verdict
    confirmed: bool = False

    def __post_init__(self):
        if self.confirmed and self.verdict is not Verdict.PARTITIONABLE:
            raise ValueError("confirmed implies PARTITIONABLE")


class ProtocolError(RuntimeError):
    """The driver called a node out of order. Never raised on message content."""


class NectarNode:
    def __init__(
        self,
        n: int,
        t: int,
        self_id: int,
        neighbors,
        proofs: Mapping[int, NeighborhoodProof],
        keypair: KeyPair,
        directory: KeyDirectory,
    ):
        neighbors = frozenset(neighbors)
        if keypair.node != self_id:
            raise ValueError(f"key pair belongs to node {keypair.node}, not {self_id}")
        if set(proofs) != neighbors:
            raise ValueError(f"node {self_id}: proofs do not match the declared neighbourhood")
        self.n = n
        self.t = t
        self.self_id = self_id
        self.neighbors = tuple(sorted(neighbors))
        self._nbr_set = neighbors
        self._key = keypair
        self._dir = directory
        # G_i: edge (u < v) -> proof; symmetric by construction
        self.discovered: dict[tuple[int, int], NeighborhoodProof] = {}
        for j, proof in proofs.items():
            if {proof.u, proof.v} != {self_id, j} or not verify_proof(proof, directory):
                raise ValueError(f"node {self_id}: invalid proof for edge with {j}")
            self.discovered[proof.edge] = proof
        self._own = [proofs[j] for j in self.neighbors]
        self._to_be_sent: dict[int, list[tuple[ChainedMessage, int]]] = {}
        self.round = 0
        self.decision: Decision | None = None

    def round_outgoing(self, rnd: int) -> list[tuple[tuple[int, ...], ChainedMessage]]:
        if rnd != self.round + 1 or rnd > self.n - 1:
            raise ProtocolError(f"node {self.self_id}: round {rnd} after round {self.round}")
        self.round = rnd
        if rnd == 1:
            dests = self.neighbors
            return [(dests, start_chain(p, self._key)) for p in self._own]
        out = []
        for msg, came_from in self._to_be_sent.pop(rnd, ()):
            dests = tuple(x for x in self.neighbors if x != came_from)
            if dests:
                out.append((dests, extend_chain(msg, self._key)))
        return out

    def on_receive(self, msg, sender: int, rnd: int) -> None:
        if rnd != self.round:
            raise ProtocolError(f"node {self.self_id}: delivery for round {rnd} during round {self.round}")
        # Invalid messages are ignored
        if sender not in self._nbr_set or type(msg) is not ChainedMessage:
            return
        chain = msg.chain
        if len(chain) != rnd:
            return
        try:
            edge = msg.proof.edge
            if edge in self.discovered or chain[-1][0] != sender:
                return
        except (AttributeError, IndexError, TypeError):
            return
        if not verify_chain(msg, self._dir).valid:
            return
        u, v = edge
        if not (0 <= u < v < self.n):
            return
        self.discovered[edge] = msg.proof
        self._to_be_sent.setdefault(rnd + 1, []).append((msg, sender))

    def discovered_graph(self) -> Graph:
        return Graph(self.n, frozenset(self.discovered))

    def decide(self) -> Decision:
        if self.decision is not None:
            return self.decision
        if self.round != self.n - 1:
            raise ProtocolError(
                f"node {self.self_id}: decide after round {self.round}, expected {self.n - 1}"
            )
        if self.n == 1:
            self.decision = Decision(Verdict.NOT_PARTITIONABLE, False)
            return self.decision
        g = self.discovered_graph()
        reach = reachable_component(g, self.self_id)
        r = len(reach)
        k = vertex_connectivity(g if r == self.n else induced(g, reach))
        if k > self.t and r == self.n:
            self.decision = Decision(Verdict.NOT_PARTITIONABLE, False)
        else:
            self.decision = Decision(Verdict.PARTITIONABLE, confirmed=r != self.n)
        return self.decision
