"""Signing keys, neighbourhood proofs and relay signature chains.

Two providers are available. ``"tag"`` (the default) is an idealised
signature scheme: tags are HMAC-SHA256 under a per-node secret, and the
verify key holds that secret privately so verification works without
handing the secret to callers. It is fast and reproducible, and unforgeable
for any code that only uses the public surface. ``"ed25519"`` wraps real
Ed25519 keys from ``cryptography`` with deterministic seeds.

Wire sizes never depend on the provider: accounting always uses ``sig_len``.
"""

from __future__ import annotations

import hashlib
import hmac
from collections.abc import Mapping
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, NamedTuple

__all__ = [
    "SIG_LEN",
    "ID_LEN",
    "KeyPair",
    "KeyDirectory",
    "NeighborhoodProof",
    "ChainedMessage",
    "ChainCheck",
    "SignedID",
    "ChainError",
    "keygen",
    "make_directory",
    "make_proof",
    "verify_proof",
    "start_chain",
    "extend_chain",
    "verify_chain",
    "edge_proofs",
    "sign_id",
    "verify_id",
    "edge_bytes",
]

SIG_LEN = 72  # DER-encoded ECDSA upper bound
ID_LEN = 4


class ChainError(ValueError):
    """Illegal chain construction (duplicate signer, bad first signer)."""


def _u32(x: int) -> bytes:
    return int(x).to_bytes(4, "big")


def _seed_bytes(seed: int | bytes) -> bytes:
    if isinstance(seed, bytes):
        return seed
    return int(seed).to_bytes(8, "big", signed=True)


class _TagSigner:
    __slots__ = ("_secret",)

    def __init__(self, secret: bytes):
        self._secret = secret

    def sign(self, data: bytes) -> bytes:
        return hmac.new(self._secret, data, hashlib.sha256).digest()

    def __eq__(self, other):
        return isinstance(other, _TagSigner) and hmac.compare_digest(self._secret, other._secret)

    def __hash__(self):
        return hash(self._secret)

    def __repr__(self):
        return "<tag signing key>"


class _TagVerifier:
    __slots__ = ("_secret", "fingerprint")

    def __init__(self, secret: bytes):
        self._secret = secret
        self.fingerprint = hashlib.sha256(b"vk" + secret).digest()

    def verify(self, sig: bytes, data: bytes) -> bool:
        expected = hmac.new(self._secret, data, hashlib.sha256).digest()
        return hmac.compare_digest(expected, sig)

    def __eq__(self, other):
        return isinstance(other, _TagVerifier) and self.fingerprint == other.fingerprint

    def __hash__(self):
        return hash(self.fingerprint)

    def __repr__(self):
        return f"<tag verify key {self.fingerprint[:4].hex()}>"


class _EdSigner:
    __slots__ = ("_key",)

    def __init__(self, key):
        self._key = key

    def sign(self, data: bytes) -> bytes:
        return self._key.sign(data)

    def __eq__(self, other):
        return isinstance(other, _EdSigner) and self._raw() == other._raw()

    def __hash__(self):
        return hash(self._raw())

    def _raw(self) -> bytes:
        from cryptography.hazmat.primitives import serialization

        return self._key.private_bytes(
            serialization.Encoding.Raw,
            serialization.PrivateFormat.Raw,
            serialization.NoEncryption(),
        )


class _EdVerifier:
    __slots__ = ("_key", "fingerprint")

    def __init__(self, key):
        from cryptography.hazmat.primitives import serialization

        self._key = key
        self.fingerprint = key.public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )

    def verify(self, sig: bytes, data: bytes) -> bool:
        from cryptography.exceptions import InvalidSignature

        try:
            self._key.verify(sig, data)
        except (InvalidSignature, ValueError, TypeError):
            return False
        return True

    def __eq__(self, other):
        return isinstance(other, _EdVerifier) and self.fingerprint == other.fingerprint

    def __hash__(self):
        return hash(self.fingerprint)


@dataclass(frozen=True)
class KeyPair:
    node: int
    signing_key: object
    verify_key: object

    def sign(self, data: bytes) -> bytes:
        return self.signing_key.sign(data)


def keygen(node: int, seed: int | bytes = 0, provider: str = "tag") -> KeyPair:
    """Deterministic key pair for ``node`` under ``seed``."""
    material = hashlib.sha256(b"partdetect/key" + _seed_bytes(seed) + _u32(node)).digest()
    if provider == "tag":
        return KeyPair(node, _TagSigner(material), _TagVerifier(material))
    if provider == "ed25519":
        from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

        sk = Ed25519PrivateKey.from_private_bytes(material)
        return KeyPair(node, _EdSigner(sk), _EdVerifier(sk.public_key()))
    raise ValueError(f"unknown signature provider {provider!r}")


class KeyDirectory(Mapping):
    """Public verify keys for nodes ``0..n-1``.

    Also memoises chain verification results, keyed on full message content.
    """

    def __init__(self, keys: Mapping[int, object]):
        n = len(keys)
        if set(keys) != set(range(n)):
            raise ValueError("directory must cover exactly the nodes 0..n-1")
        self._keys = dict(keys)
        self._chain_cache: dict[ChainedMessage, ChainCheck] = {}

    def __getitem__(self, node: int):
        return self._keys[node]

    def __iter__(self) -> Iterator[int]:
        return iter(self._keys)

    def __len__(self) -> int:
        return len(self._keys)

    def verify(self, node: int, sig: bytes, data: bytes) -> bool:
        key = self._keys.get(node)
        if key is None or not isinstance(sig, bytes):
            return False
        return key.verify(sig, data)


def make_directory(keypairs: Mapping[int, KeyPair] | list[KeyPair]) -> KeyDirectory:
    items = keypairs.values() if isinstance(keypairs, Mapping) else keypairs
    return KeyDirectory({kp.node: kp.verify_key for kp in items})


def edge_bytes(u: int, v: int) -> bytes:
    a, b = (u, v) if u < v else (v, u)
    return b"EDGE" + _u32(a) + _u32(b)


@dataclass(frozen=True)
class NeighborhoodProof:
    u: int
    v: int
    sig_u: bytes
    sig_v: bytes

    @property
    def edge(self) -> tuple[int, int]:
        return (self.u, self.v)

    def encode(self) -> bytes:
        return _u32(self.u) + _u32(self.v) + self.sig_u + self.sig_v

    @cached_property
    def digest(self) -> bytes:
        return hashlib.sha256(self.encode()).digest()

    @staticmethod
    def wire_size(sig_len: int = SIG_LEN) -> int:
        return 2 * ID_LEN + 2 * sig_len


def make_proof(a: KeyPair, b: KeyPair) -> NeighborhoodProof:
    if a.node == b.node:
        raise ValueError(f"cannot prove an edge from node {a.node} to itself")
    if a.node > b.node:
        a, b = b, a
    data = edge_bytes(a.node, b.node)
    return NeighborhoodProof(a.node, b.node, a.sign(data), b.sign(data))


def verify_proof(p: NeighborhoodProof, directory: KeyDirectory) -> bool:
    try:
        if not (isinstance(p.u, int) and isinstance(p.v, int) and 0 <= p.u < p.v):
            return False
        data = edge_bytes(p.u, p.v)
        return directory.verify(p.u, p.sig_u, data) and directory.verify(p.v, p.sig_v, data)
    except Exception:
        return False


def edge_proofs(edges, keypairs: Mapping[int, KeyPair]) -> dict[tuple[int, int], NeighborhoodProof]:
    """Neighbourhood proofs for every edge, as pre-provisioned at set-up."""
    return {(u, v): make_proof(keypairs[u], keypairs[v]) for u, v in edges}


@dataclass(frozen=True)
class ChainedMessage:
    """A proof wrapped in relay signatures.

    Link 1 signs ``H(proof)``; link ``r+1`` signs ``H(proof) || sig_r``.
    """

    proof: NeighborhoodProof
    chain: tuple[tuple[int, bytes], ...]

    @property
    def length(self) -> int:
        return len(self.chain)

    @property
    def signers(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.chain)

    @property
    def edge(self) -> tuple[int, int]:
        return self.proof.edge

    def encode(self) -> bytes:
        out = [self.proof.encode()]
        for signer, sig in self.chain:
            out.append(_u32(signer) + sig)
        return b"".join(out)

    def wire_size(self, sig_len: int = SIG_LEN) -> int:
        return NeighborhoodProof.wire_size(sig_len) + len(self.chain) * (ID_LEN + sig_len)


def _link_data(proof: NeighborhoodProof, prev_sig: bytes | None) -> bytes:
    return proof.digest if prev_sig is None else proof.digest + prev_sig


def start_chain(proof: NeighborhoodProof, signer: KeyPair) -> ChainedMessage:
    if signer.node not in (proof.u, proof.v):
        raise ChainError(f"node {signer.node} is not an endpoint of edge {proof.edge}")
    sig = signer.sign(_link_data(proof, None))
    return ChainedMessage(proof, ((signer.node, sig),))


def extend_chain(m: ChainedMessage, signer: KeyPair) -> ChainedMessage:
    if any(s == signer.node for s, _ in m.chain):
        raise ChainError(f"node {signer.node} already signed this chain")
    sig = signer.sign(_link_data(m.proof, m.chain[-1][1]))
    return ChainedMessage(m.proof, m.chain + ((signer.node, sig),))


class ChainCheck(NamedTuple):
    valid: bool
    length: int
    edge: tuple[int, int] | None
    signers: tuple[int, ...]


def _check_chain(m: ChainedMessage, directory: KeyDirectory) -> ChainCheck:
    chain = m.chain
    proof = m.proof
    bad = ChainCheck(False, len(chain), None, ())
    if not chain or not verify_proof(proof, directory):
        return bad
    signers = tuple(s for s, _ in chain)
    if len(set(signers)) != len(signers) or signers[0] not in (proof.u, proof.v):
        return bad
    prev = None
    for signer, sig in chain:
        if not directory.verify(signer, sig, _link_data(proof, prev)):
            return bad
        prev = sig
    return ChainCheck(True, len(chain), proof.edge, signers)


def verify_chain(m: ChainedMessage, directory: KeyDirectory) -> ChainCheck:
    """Check proof, every link, distinct signers and an endpoint as first signer."""
    invalid = ChainCheck(False, 0, None, ())
    if not isinstance(m, ChainedMessage) or not isinstance(m.proof, NeighborhoodProof):
        return invalid
    cache = directory._chain_cache
    try:
        cached = cache.get(m)
    except TypeError:  # unhashable fields: cannot be a well-formed chain
        return invalid
    if cached is not None:
        return cached
    try:
        result = _check_chain(m, directory)
    except Exception:
        result = invalid
    cache[m] = result
    return result


@dataclass(frozen=True)
class SignedID:
    node: int
    sig: bytes

    def encode(self) -> bytes:
        return _u32(self.node) + self.sig

    @staticmethod
    def wire_size(sig_len: int = SIG_LEN) -> int:
        return ID_LEN + sig_len


def _id_bytes(node: int) -> bytes:
    return b"ID" + _u32(node)


def sign_id(kp: KeyPair) -> SignedID:
    return SignedID(kp.node, kp.sign(_id_bytes(kp.node)))


def verify_id(s: SignedID, directory: KeyDirectory) -> bool:
    try:
        return directory.verify(s.node, s.sig, _id_bytes(s.node))
    except Exception:
        return False
