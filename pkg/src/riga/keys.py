"""Ed25519 key pairs and node identities.

Ed25519 is used because signing is deterministic and verification needs only
the 32-byte public key; the store treats key bytes as opaque.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

_RAW = dict(encoding=serialization.Encoding.Raw, format=serialization.PublicFormat.Raw)


class MalformedKey(ValueError):
    pass


def _private(raw: bytes) -> Ed25519PrivateKey:
    try:
        return Ed25519PrivateKey.from_private_bytes(bytes(raw))
    except (ValueError, TypeError) as exc:
        raise MalformedKey(f"bad private key: {exc}") from exc


def _public(raw: bytes) -> Ed25519PublicKey:
    try:
        return Ed25519PublicKey.from_public_bytes(bytes(raw))
    except (ValueError, TypeError) as exc:
        raise MalformedKey(f"bad public key: {exc}") from exc


def public_from_private(private_key: bytes) -> bytes:
    return _private(private_key).public_key().public_bytes(**_RAW)


def sign(private_key: bytes, message: bytes) -> bytes:
    return _private(private_key).sign(message)


def verify(public_key: bytes, message: bytes, signature: bytes) -> bool:
    key = _public(public_key)
    try:
        key.verify(bytes(signature), bytes(message))
    except InvalidSignature:
        return False
    return True


@dataclass(frozen=True)
class NodeId:
    """A node identity: ``id = SHA-256(public_key)``.

    ``private_key`` is only populated on the copy held by the owning agent;
    :meth:`public` strips it before the identity is shared.
    """

    id: bytes
    public_key: bytes
    private_key: Optional[bytes] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if hashlib.sha256(self.public_key).digest() != self.id:
            raise MalformedKey("node id is not the hash of its public key")

    @classmethod
    def from_private(cls, private_key: bytes) -> "NodeId":
        pub = public_from_private(private_key)
        return cls(hashlib.sha256(pub).digest(), pub, bytes(private_key))

    @classmethod
    def from_seed(cls, *labels) -> "NodeId":
        """Deterministic identity for simulations; never use for real keys."""
        h = hashlib.sha256(b"riga-node-key")
        for part in labels:
            h.update(repr(part).encode() + b"\x00")
        return cls.from_private(h.digest())

    @classmethod
    def generate(cls) -> "NodeId":
        priv = Ed25519PrivateKey.generate().private_bytes(
            encoding=serialization.Encoding.Raw,
            format=serialization.PrivateFormat.Raw,
            encryption_algorithm=serialization.NoEncryption(),
        )
        return cls.from_private(priv)

    def public(self) -> "NodeId":
        return NodeId(self.id, self.public_key)

    def owns_key(self) -> bool:
        return self.private_key is not None and public_from_private(self.private_key) == self.public_key

    @property
    def hex(self) -> str:
        return self.id.hex()

    def short(self) -> str:
        return self.id.hex()[:12]
