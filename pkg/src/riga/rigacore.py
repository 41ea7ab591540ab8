"""Resource identifier generation over content addresses.

A RIGA walks a counter domain and maps each counter to a URI. The IPFS
instantiation here uses a *skewed* generator: a polynomial over GF(p) forced
through a handful of anchor points ``(counter, digest)``, so that the stream
looks arbitrary everywhere except at the anchors, where it lands on the CIDs
of files the operator prepared in advance.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

from .cidcodec import CidV0, cid_from_digest, cid_from_value, parse_cid
from .modfield import (
    DuplicateAbscissa,
    FieldPoly,
    is_probable_prime,
    lagrange_interpolate,
    poly_eval,
    require_prime,
)
from .rng import GENERATOR_NAME, seeded_permutation

__all__ = [
    "PRODUCTION_PRIME",
    "HASH_BITS",
    "RigaError",
    "DuplicateCounter",
    "PrimeTooSmall",
    "CounterDomain",
    "Anchor",
    "AnchorSet",
    "SkewedPrng",
    "NameRiga",
    "Campaign",
    "build_skewed_prng",
    "uri_at",
    "uri_stream",
    "build_name_riga",
    "plan_campaign",
]

HASH_BITS = 256
HASH_MASK = (1 << HASH_BITS) - 1

# smallest prime above 2**256; out-of-range outputs occur with probability ~2**-247
PRODUCTION_PRIME = 2**256 + 297

if not is_probable_prime(PRODUCTION_PRIME):  # pragma: no cover
    raise ImportError("PRODUCTION_PRIME failed the primality check")

DEFAULT_UPPER = 2**20
DEFAULT_TICK_SECONDS = 2.0
DEFAULT_MAX_ANCHORS = 64


class RigaError(ValueError):
    pass


class DuplicateCounter(RigaError):
    pass


class PrimeTooSmall(RigaError):
    pass


@dataclass(frozen=True)
class CounterDomain:
    start: int = 0
    upper: int = DEFAULT_UPPER
    tick_interval: float = DEFAULT_TICK_SECONDS

    def __post_init__(self):
        if self.start < 0 or self.start > self.upper:
            raise RigaError(f"need 0 <= start <= upper, got [{self.start}, {self.upper}]")
        if not self.tick_interval > 0:
            raise RigaError("tick_interval must be positive")

    def __contains__(self, counter: int) -> bool:
        return self.start <= counter <= self.upper

    def __len__(self) -> int:
        return self.upper - self.start + 1

    def time_of(self, counter: int) -> float:
        """Simulated seconds after the sweep starts at which ``counter`` is due."""
        return (counter - self.start) * self.tick_interval


@dataclass(frozen=True)
class Anchor:
    counter: int
    digest: bytes

    def __post_init__(self):
        if self.counter < 0:
            raise RigaError("anchor counters are non-negative")
        if len(self.digest) != 32:
            raise RigaError("anchor digests are 32 bytes")

    @property
    def value(self) -> int:
        return int.from_bytes(self.digest, "big")

    @property
    def cid(self) -> CidV0:
        return cid_from_digest(self.digest)


@dataclass(frozen=True)
class AnchorSet:
    anchors: Tuple[Anchor, ...]
    max_anchors: int = DEFAULT_MAX_ANCHORS

    def __post_init__(self):
        anchors = tuple(self.anchors)
        object.__setattr__(self, "anchors", anchors)
        if not 1 <= len(anchors) <= self.max_anchors:
            raise RigaError(f"need between 1 and {self.max_anchors} anchors, got {len(anchors)}")
        seen = set()
        for a in anchors:
            if a.counter in seen:
                raise DuplicateCounter(f"counter {a.counter} anchored twice")
            seen.add(a.counter)

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[int, bytes]], **kw) -> "AnchorSet":
        return cls(tuple(Anchor(int(v), bytes(h)) for v, h in pairs), **kw)

    def check_domain(self, domain: CounterDomain) -> None:
        for a in self.anchors:
            if a.counter not in domain:
                raise RigaError(f"anchor counter {a.counter} outside [{domain.start}, {domain.upper}]")

    def __iter__(self):
        return iter(self.anchors)

    def __len__(self) -> int:
        return len(self.anchors)


def _identity(value: int) -> int:
    return value


@dataclass(frozen=True)
class SkewedPrng:
    """Counter -> 256-bit value generator that hits every anchor exactly.

    ``postprocess`` is a slot for output hardening; it ships as the identity.
    Any replacement must fix the anchor values or anchors stop resolving.
    """

    poly: FieldPoly
    prime: int
    hash_bits: int = HASH_BITS
    postprocess: Callable[[int], int] = field(default=_identity, compare=False, repr=False)

    def value_at(self, counter: int) -> int:
        # p > 2**256, so a handful of outputs land in [2**256, p); fold them back
        return self.postprocess(poly_eval(self.poly, counter)) & HASH_MASK

    def uri_at(self, counter: int) -> CidV0:
        return cid_from_value(self.value_at(counter))


def build_skewed_prng(anchors: AnchorSet, p: int = PRODUCTION_PRIME) -> SkewedPrng:
    require_prime(p)
    if isinstance(anchors, AnchorSet):
        anchor_list = anchors.anchors
    else:
        anchor_list = tuple(anchors)
    counters = [a.counter for a in anchor_list]
    if len(set(counters)) != len(counters):
        raise DuplicateCounter("anchor counters must be distinct")
    for a in anchor_list:
        if a.value >= p:
            raise PrimeTooSmall(f"prime {p} does not exceed anchor value {a.value}")
        if a.counter >= p:
            raise PrimeTooSmall(f"prime {p} does not exceed counter {a.counter}")
    try:
        poly = lagrange_interpolate([(a.counter, a.value) for a in anchor_list], p)
    except DuplicateAbscissa as exc:  # pragma: no cover - caught above
        raise DuplicateCounter(str(exc)) from exc
    return SkewedPrng(poly, p)


def uri_at(prng: SkewedPrng, counter: int) -> CidV0:
    return prng.uri_at(counter)


def uri_stream(prng: SkewedPrng, domain: CounterDomain) -> Iterator[Tuple[int, CidV0]]:
    """Lazily yield ``(counter, cid)`` for every counter of ``domain`` in order.

    Counter ``c`` is due ``domain.time_of(c)`` simulated seconds into the sweep.
    """
    for counter in range(domain.start, domain.upper + 1):
        yield counter, prng.uri_at(counter)


@dataclass(frozen=True)
class NameRiga:
    """Mutable-name variant: the same skewed polynomial, walked in a seeded random order.

    Emitted identifiers are name digests framed like CIDs; they are resolved
    through the name registry rather than fetched as content.
    """

    prng: SkewedPrng
    domain: CounterDomain
    shuffle_seed: int
    visit_order: Tuple[int, ...] = field(repr=False)
    generator: str = GENERATOR_NAME

    @property
    def poly(self) -> FieldPoly:
        return self.prng.poly

    def name_at(self, counter: int) -> CidV0:
        return self.prng.uri_at(counter)

    def sweep(self) -> Iterator[Tuple[int, CidV0]]:
        for counter in self.visit_order:
            yield counter, self.prng.uri_at(counter)


def build_name_riga(
    anchors: AnchorSet,
    p: int = PRODUCTION_PRIME,
    shuffle_seed: int = 0,
    domain: Optional[CounterDomain] = None,
) -> NameRiga:
    domain = domain or CounterDomain()
    if isinstance(anchors, AnchorSet):
        anchors.check_domain(domain)
    prng = build_skewed_prng(anchors, p)
    order = tuple(seeded_permutation(domain.start, domain.upper, shuffle_seed & (2**64 - 1)))
    return NameRiga(prng, domain, shuffle_seed, order)


def plan_campaign(
    command_payloads: Sequence[bytes],
    counters: Sequence[int],
    p: int = PRODUCTION_PRIME,
    max_anchors: int = DEFAULT_MAX_ANCHORS,
) -> Tuple[SkewedPrng, List[CidV0]]:
    """Anchor each payload's SHA-256 at its counter. Nothing is published."""
    if len(command_payloads) != len(counters):
        raise RigaError(
            f"{len(command_payloads)} payloads but {len(counters)} counters"
        )
    anchors = AnchorSet.from_pairs(
        [(c, hashlib.sha256(bytes(pl)).digest()) for pl, c in zip(command_payloads, counters)],
        max_anchors=max_anchors,
    )
    prng = build_skewed_prng(anchors, p)
    return prng, [a.cid for a in anchors]


@dataclass(frozen=True)
class Campaign:
    """The campaign file handed to bots: prime, anchors, counter domain, shuffle seed.

    ``trusted_keys`` (hex public keys) is optional and only present when the
    anchored payloads are signed command envelopes.
    """

    prime: int
    anchors: AnchorSet
    domain: CounterDomain = CounterDomain()
    shuffle_seed: int = 0
    trusted_keys: Tuple[str, ...] = ()

    def __post_init__(self):
        self.anchors.check_domain(self.domain)

    def prng(self) -> SkewedPrng:
        return build_skewed_prng(self.anchors, self.prime)

    def name_riga(self) -> NameRiga:
        return build_name_riga(self.anchors, self.prime, self.shuffle_seed, self.domain)

    @property
    def anchor_cids(self) -> List[CidV0]:
        return [a.cid for a in self.anchors]

    def to_dict(self) -> dict:
        out = {
            "prime": str(self.prime),
            "anchors": [{"counter": a.counter, "cid": a.cid.text} for a in self.anchors],
            "domain": {
                "start": self.domain.start,
                "upper": self.domain.upper,
                "tick_seconds": self.domain.tick_interval,
            },
            "shuffle_seed": self.shuffle_seed,
            "shuffle_generator": GENERATOR_NAME,
        }
        if self.trusted_keys:
            out["trusted_keys"] = list(self.trusted_keys)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Campaign":
        gen = d.get("shuffle_generator", GENERATOR_NAME)
        if gen != GENERATOR_NAME:
            raise RigaError(f"unsupported shuffle generator {gen!r}")
        dom = d.get("domain", {})
        domain = CounterDomain(
            int(dom.get("start", 0)),
            int(dom.get("upper", DEFAULT_UPPER)),
            float(dom.get("tick_seconds", DEFAULT_TICK_SECONDS)),
        )
        anchors = AnchorSet.from_pairs(
            [(int(a["counter"]), parse_cid(a["cid"]).digest) for a in d["anchors"]]
        )
        return cls(
            prime=int(d["prime"]),
            anchors=anchors,
            domain=domain,
            shuffle_seed=int(d.get("shuffle_seed", 0)),
            trusted_keys=tuple(d.get("trusted_keys", ())),
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Campaign":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json())
