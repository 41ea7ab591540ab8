"""Named, versioned deterministic randomness.

``sha256-ctr/1`` hashes ``seed || label || block counter`` to produce a byte
stream. It is deliberately independent of the interpreter's ``random``
module so that name-RIGA visit orders stay stable across Python releases.
Simulator substreams use :class:`random.Random` seeded from
:func:`substream_seed`, which is also a pure function of its inputs.
"""
from __future__ import annotations

import hashlib
import random
from typing import List, MutableSequence

GENERATOR_NAME = "sha256-ctr/1"


def _encode(part) -> bytes:
    if isinstance(part, bytes):
        return part
    if isinstance(part, int):
        return part.to_bytes(max(1, (part.bit_length() + 8) // 8), "big", signed=True)
    return str(part).encode()


def substream_seed(master_seed: int, *labels) -> int:
    """64-bit seed for the substream named by ``labels``.

    Each label set gets its own stream, so adding a consumer never shifts the
    samples seen by the others.
    """
    h = hashlib.sha256()
    for part in (master_seed, *labels):
        b = _encode(part)
        h.update(len(b).to_bytes(4, "big") + b)
    return int.from_bytes(h.digest()[:8], "big")


def substream(master_seed: int, *labels) -> random.Random:
    return random.Random(substream_seed(master_seed, *labels))


class Sha256Ctr:
    name = GENERATOR_NAME

    def __init__(self, seed: int, label: str = ""):
        self._key = _encode(seed) + b"\x00" + label.encode()
        self._block = 0
        self._buf = b""

    def randbytes(self, n: int) -> bytes:
        while len(self._buf) < n:
            self._buf += hashlib.sha256(self._key + self._block.to_bytes(8, "big")).digest()
            self._block += 1
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def getrandbits(self, k: int) -> int:
        if k <= 0:
            return 0
        n = int.from_bytes(self.randbytes((k + 7) // 8), "big")
        return n >> (-k % 8)

    def randbelow(self, n: int) -> int:
        # rejection sampling keeps the result exactly uniform
        if n <= 0:
            raise ValueError("n must be positive")
        k = n.bit_length()
        while True:
            r = self.getrandbits(k)
            if r < n:
                return r

    def shuffle(self, items: MutableSequence) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]


def seeded_permutation(start: int, upper: int, seed: int) -> List[int]:
    """Fisher-Yates permutation of ``[start, upper]`` driven by sha256-ctr/1."""
    order = list(range(start, upper + 1))
    Sha256Ctr(seed, "visit-order").shuffle(order)
    return order
