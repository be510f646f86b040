"""Lockstep synchronous-round simulator with byte accounting.

Every round has two phases. First each node, in ascending ID order, emits
its outgoing messages. Then every message is delivered, still within the
same round, to its recipients' ``on_receive`` handlers. A message emitted in
round R is therefore processed in round R, which is what makes a chain of
R signatures the fresh length for round R.

A node is any object with ``round_outgoing(rnd)``, returning
``[(recipients, payload), ...]``, ``on_receive(payload, sender, rnd)`` and
``decide()``. Payloads must offer ``wire_size(sig_len)`` and ``encode()``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .crypto import SIG_LEN
from .graph import Graph, induced, is_partitioned, vertex_connectivity
from .nectar import Decision, Verdict

__all__ = [
    "Envelope",
    "Transcript",
    "Measurement",
    "SimulationError",
    "run",
    "measure",
    "expected_verdict",
    "ACCOUNTING_MODES",
]

ACCOUNTING_MODES = ("multicast", "unicast")


class SimulationError(RuntimeError):
    def __init__(self, node: int, rnd: int, phase: str, cause: BaseException):
        super().__init__(f"node {node} failed in round {rnd} ({phase}): {cause!r}")
        self.node = node
        self.round = rnd
        self.phase = phase


@dataclass(frozen=True)
class Envelope:
    sender: int
    recipients: tuple[int, ...]
    payload: Any
    round: int
    size: int


@dataclass
class Transcript:
    graph: Graph
    byzantine: frozenset[int]
    t: int
    seed: int
    rounds: list[list[Envelope]] = field(default_factory=list)
    bytes_sent: list[int] = field(default_factory=list)
    messages_sent: list[int] = field(default_factory=list)
    dropped: int = 0
    decisions: dict[int, Decision | None] = field(default_factory=dict)
    accounting: str = "multicast"
    sig_len: int = SIG_LEN
    expected: Verdict | None = None

    @property
    def correct(self) -> list[int]:
        return [i for i in range(self.graph.n) if i not in self.byzantine]

    def digest(self) -> str:
        """Hash of every envelope, byte counter and decision, for replay checks."""
        h = hashlib.sha256()
        for rnd, envs in enumerate(self.rounds, 1):
            for e in envs:
                h.update(f"{rnd}|{e.sender}|{e.recipients}|{e.size}|".encode())
                h.update(e.payload.encode())
        h.update(repr(self.bytes_sent).encode())
        h.update(repr(sorted(self.decisions.items(), key=lambda kv: kv[0])).encode())
        return h.hexdigest()


def run(
    g: Graph,
    nodes: Mapping[int, Any] | Sequence[Any],
    rounds: int,
    seed: int = 0,
    *,
    byzantine=frozenset(),
    t: int = 0,
    sig_len: int = SIG_LEN,
    accounting: str = "multicast",
    record: bool = True,
    expected: Verdict | None = None,
) -> Transcript:
    """Drive ``nodes`` over ``g`` for ``rounds`` rounds, then collect decisions.

    Under ``"multicast"`` accounting a payload handed to several neighbours in
    one send counts once toward the sender's bytes; under ``"unicast"`` it
    counts once per recipient. Message counts are always per recipient.
    Recipients that are not neighbours of the sender are dropped.
    """
    n = g.n
    if isinstance(nodes, Mapping):
        if set(nodes) != set(range(n)):
            raise ValueError("nodes must be keyed exactly by 0..n-1")
        nodes = [nodes[i] for i in range(n)]
    elif len(nodes) != n:
        raise ValueError(f"expected {n} nodes, got {len(nodes)}")
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    if accounting not in ACCOUNTING_MODES:
        raise ValueError(f"accounting must be one of {ACCOUNTING_MODES}")
    multicast = accounting == "multicast"

    tr = Transcript(
        graph=g,
        byzantine=frozenset(byzantine),
        t=t,
        seed=seed,
        bytes_sent=[0] * n,
        messages_sent=[0] * n,
        accounting=accounting,
        sig_len=sig_len,
        expected=expected,
    )
    adj = g.adj
    handlers = [node.on_receive for node in nodes]
    for rnd in range(1, rounds + 1):
        batch: list[Envelope] = []
        for i, node in enumerate(nodes):
            try:
                out = node.round_outgoing(rnd)
            except Exception as exc:
                raise SimulationError(i, rnd, "send", exc) from exc
            nbrs = adj[i]
            for recipients, payload in out:
                valid = tuple(dict.fromkeys(r for r in recipients if r in nbrs))
                tr.dropped += len(recipients) - len(valid)
                if not valid:
                    continue
                size = payload.wire_size(sig_len)
                tr.bytes_sent[i] += size if multicast else size * len(valid)
                tr.messages_sent[i] += len(valid)
                batch.append(Envelope(i, valid, payload, rnd, size))
        for env in batch:
            payload, sender = env.payload, env.sender
            for r in env.recipients:
                try:
                    handlers[r](payload, sender, rnd)
                except Exception as exc:
                    raise SimulationError(r, rnd, "receive", exc) from exc
        if record:
            tr.rounds.append(batch)
    for i, node in enumerate(nodes):
        try:
            tr.decisions[i] = node.decide()
        except Exception as exc:
            raise SimulationError(i, rounds, "decide", exc) from exc
    return tr


def expected_verdict(g: Graph, byzantine, t: int) -> Verdict | None:
    """Verdict every correct node must reach, or None when either is allowed.

    A disconnected correct subgraph forces PARTITIONABLE; connectivity of at
    least ``2t`` forces NOT_PARTITIONABLE; anything in between is open.
    """
    byzantine = frozenset(byzantine)
    correct = [i for i in range(g.n) if i not in byzantine]
    if is_partitioned(induced(g, correct)):
        return Verdict.PARTITIONABLE
    if vertex_connectivity(g) >= 2 * t:
        return Verdict.NOT_PARTITIONABLE
    return None


@dataclass
class Measurement:
    bytes_per_node: dict[int, int]
    max_bytes: int
    mean_bytes: float
    verdicts: dict[int, Verdict | None]
    confirmed: dict[int, bool]
    success_rate: float | None
    agreement: bool


def measure(tr: Transcript) -> Measurement:
    """Byte statistics and decision quality over the correct nodes."""
    correct = tr.correct
    per_node = {i: tr.bytes_sent[i] for i in range(tr.graph.n)}
    corr_bytes = [per_node[i] for i in correct]
    verdicts = {}
    confirmed = {}
    for i in range(tr.graph.n):
        d = tr.decisions.get(i)
        verdicts[i] = d.verdict if isinstance(d, Decision) else None
        confirmed[i] = bool(d.confirmed) if isinstance(d, Decision) else False
    if tr.expected is None or not correct:
        success = None
    else:
        success = sum(verdicts[i] == tr.expected for i in correct) / len(correct)
    return Measurement(
        bytes_per_node=per_node,
        max_bytes=max(corr_bytes, default=0),
        mean_bytes=math.fsum(corr_bytes) / len(corr_bytes) if corr_bytes else 0.0,
        verdicts=verdicts,
        confirmed=confirmed,
        success_rate=success,
        agreement=len({verdicts[i] for i in correct}) <= 1,
    )
