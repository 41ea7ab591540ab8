"""Base58 and CIDv0 ("Qm...") encoding.

A CIDv0 is the Base58 text of a 34-byte multihash: ``0x12`` (sha2-256),
``0x20`` (32-byte digest length), then the digest itself. Digests are read
as big-endian integers when converting to and from values.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Union

__all__ = [
    "ALPHABET",
    "CodecError",
    "InvalidCharacter",
    "BadPrefix",
    "ValueTooLarge",
    "CidV0",
    "base58_encode",
    "base58_decode",
    "cid_from_value",
    "cid_from_digest",
    "cid_to_value",
    "cid_of_content",
    "parse_cid",
]

ALPHABET = "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz"
_INDEX = {c: i for i, c in enumerate(ALPHABET)}

SHA2_256 = 0x12
DIGEST_LEN = 32
MULTIHASH_HEADER = bytes((SHA2_256, DIGEST_LEN))
CID_TEXT_LEN = 46


class CodecError(ValueError):
    pass


class InvalidCharacter(CodecError):
    def __init__(self, index: int, char: str):
        super().__init__(f"invalid Base58 character {char!r} at index {index}")
        self.index = index
        self.char = char


class BadPrefix(CodecError):
    pass


class ValueTooLarge(CodecError):
    pass


def base58_encode(data: bytes) -> str:
    data = bytes(data)
    stripped = data.lstrip(b"\x00")
    zeros = len(data) - len(stripped)
    n = int.from_bytes(stripped, "big")
    out = []
    while n:
        n, r = divmod(n, 58)
        out.append(ALPHABET[r])
    return "1" * zeros + "".join(reversed(out))


def base58_decode(text: str) -> bytes:
    n = 0
    for i, c in enumerate(text):
        try:
            n = n * 58 + _INDEX[c]
        except KeyError:
            raise InvalidCharacter(i, c) from None
    zeros = len(text) - len(text.lstrip("1"))
    body = n.to_bytes((n.bit_length() + 7) // 8, "big") if n else b""
    return b"\x00" * zeros + body


@dataclass(frozen=True)
class CidV0:
    """A sha2-256 CIDv0. Build with :func:`parse_cid` or :func:`cid_from_digest`."""

    multihash: bytes
    text: str

    def __post_init__(self):
        if len(self.multihash) != 2 + DIGEST_LEN or self.multihash[:2] != MULTIHASH_HEADER:
            raise BadPrefix(f"not a sha2-256 multihash: {self.multihash[:2].hex()}")
        if base58_encode(self.multihash) != self.text:
            raise CodecError(f"text {self.text!r} does not encode the given multihash")

    @property
    def digest(self) -> bytes:
        return self.multihash[2:]

    def __str__(self) -> str:
        return self.text


def cid_from_digest(digest: bytes) -> CidV0:
    digest = bytes(digest)
    if len(digest) != DIGEST_LEN:
        raise CodecError(f"digest must be {DIGEST_LEN} bytes, got {len(digest)}")
    mh = MULTIHASH_HEADER + digest
    return CidV0(mh, base58_encode(mh))


def cid_from_value(v: int) -> CidV0:
    if v < 0:
        raise CodecError("value must be non-negative")
    if v >> (8 * DIGEST_LEN):
        raise ValueTooLarge(f"value needs {v.bit_length()} bits, limit is 256")
    return cid_from_digest(v.to_bytes(DIGEST_LEN, "big"))


def cid_to_value(cid: Union[CidV0, str]) -> int:
    if isinstance(cid, str):
        cid = parse_cid(cid)
    return int.from_bytes(cid.digest, "big")


def cid_of_content(content: bytes) -> CidV0:
    return cid_from_digest(hashlib.sha256(content).digest())


def parse_cid(text: str) -> CidV0:
    """Decode CIDv0 text; CIDv1 and other multibase forms are rejected."""
    if isinstance(text, CidV0):
        return text
    raw = base58_decode(text)
    if len(raw) != 2 + DIGEST_LEN or raw[:2] != MULTIHASH_HEADER:
        raise BadPrefix(f"{text[:12]!r}... is not a CIDv0 (Qm...) identifier")
    if base58_encode(raw) != text:
        # only non-canonical leading '1' padding can get here
        raise BadPrefix(f"{text!r} is not canonical Base58")
    return CidV0(raw, text)
