"""In-memory content-addressed store with pinning and a mutable-name registry.

CIDs here are SHA-256 over the raw bytes of an object (for a chunked file's
root: over its children's concatenated multihashes). Real IPFS hashes a
UnixFS/protobuf encoding instead, so CIDs from this simulator will not match
the ones a live node computes for the same file.

There is no delete operation. Content disappears only when its last
provider unpins it, and then it is gone for good: no grace period.
"""
from __future__ import annotations

import base64
import hashlib
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Set, Tuple, Union

from .cidcodec import CidV0, cid_from_digest, parse_cid
from .keys import MalformedKey, NodeId, sign, verify

__all__ = [
    "BLOCK_SIZE",
    "StoreError",
    "UnknownNode",
    "NotFound",
    "NotPinned",
    "UnknownName",
    "Unauthorized",
    "StoredObject",
    "NameRecord",
    "Store",
]

BLOCK_SIZE = 256 * 1024


class StoreError(Exception):
    pass


class UnknownNode(StoreError):
    pass


class NotFound(StoreError, LookupError):
    pass


class NotPinned(StoreError):
    pass


class UnknownName(StoreError, LookupError):
    pass


class Unauthorized(StoreError, PermissionError):
    pass


CidLike = Union[CidV0, str]


def _key(cid: CidLike) -> str:
    return cid.text if isinstance(cid, CidV0) else parse_cid(cid).text


@dataclass(frozen=True)
class StoredObject:
    data: bytes
    links: Tuple[CidV0, ...] = ()

    def __post_init__(self):
        if len(self.data) > BLOCK_SIZE:
            raise ValueError(f"data block of {len(self.data)} bytes exceeds {BLOCK_SIZE}")

    def serialize(self) -> bytes:
        if self.links:
            return b"".join(link.multihash for link in self.links)
        return self.data

    @property
    def cid(self) -> CidV0:
        return cid_from_digest(hashlib.sha256(self.serialize()).digest())


@dataclass(frozen=True)
class NameRecord:
    name: bytes
    current: CidV0
    version: int
    signature: bytes = b""

    @staticmethod
    def signed_bytes(name: bytes, version: int, cid: CidV0) -> bytes:
        return name + version.to_bytes(8, "big") + cid.multihash


def _as_name(name: Union[bytes, CidV0]) -> bytes:
    if isinstance(name, CidV0):
        return name.digest
    return bytes(name)


class Store:
    """The whole simulated swarm, seen from an omniscient vantage point.

    Provider lookup is an exact global map rather than a DHT walk. Mutations
    are expected to be serialized by the simulator's event loop.
    """

    def __init__(self):
        self._nodes: Dict[bytes, NodeId] = {}
        self._objects: Dict[str, StoredObject] = {}
        self._pins: Dict[str, Set[bytes]] = {}
        self._parents: Dict[str, Set[str]] = {}
        self._names: Dict[bytes, NameRecord] = {}

    # -- nodes ---------------------------------------------------------------

    def register_node(self, node: NodeId) -> NodeId:
        public = node.public()
        self._nodes[public.id] = public
        return public

    def _require_node(self, node: NodeId) -> bytes:
        if node.id not in self._nodes:
            raise UnknownNode(f"node {node.short()} is not registered")
        return node.id

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    # -- objects -------------------------------------------------------------

    def _insert(self, obj: StoredObject) -> CidV0:
        cid = obj.cid
        self._objects.setdefault(cid.text, obj)
        for link in obj.links:
            self._parents.setdefault(link.text, set()).add(cid.text)
        return cid

    def put_object(self, node: NodeId, content: bytes) -> CidV0:
        """Store ``content`` and make ``node`` its (sole, if new) provider."""
        node_id = self._require_node(node)
        content = bytes(content)
        if len(content) <= BLOCK_SIZE:
            cid = self._insert(StoredObject(content))
        else:
            links = tuple(
                self._insert(StoredObject(content[i : i + BLOCK_SIZE]))
                for i in range(0, len(content), BLOCK_SIZE)
            )
            cid = self._insert(StoredObject(b"", links))
        self._pins.setdefault(cid.text, set()).add(node_id)
        return cid

    def object(self, cid: CidLike) -> Optional[StoredObject]:
        """Raw object lookup, ignoring availability (forensic view)."""
        return self._objects.get(_key(cid))

    def _provider_ids(self, key: str, _seen: Optional[Set[str]] = None) -> Set[bytes]:
        out = set(self._pins.get(key, ()))
        parents = self._parents.get(key)
        if parents:
            seen = _seen if _seen is not None else set()
            for parent in parents:
                if parent not in seen:
                    seen.add(parent)
                    out |= self._provider_ids(parent, seen)
        return out

    def providers(self, cid: CidLike) -> FrozenSet[NodeId]:
        return frozenset(self._nodes[i] for i in self._provider_ids(_key(cid)))

    def is_available(self, cid: CidLike) -> bool:
        key = _key(cid)
        obj = self._objects.get(key)
        if obj is None or not self._provider_ids(key):
            return False
        return all(self.is_available(link) for link in obj.links)

    def get_object(self, cid: CidLike) -> bytes:
        key = _key(cid)
        obj = self._objects.get(key)
        if obj is None:
            raise NotFound(f"{key} was never stored")
        if not self._provider_ids(key):
            raise NotFound(f"{key} has no providers")
        if not obj.links:
            return obj.data
        return b"".join(self.get_object(link) for link in obj.links)

    def pin(self, node: NodeId, cid: CidLike) -> int:
        node_id = self._require_node(node)
        key = _key(cid)
        if not self.is_available(key):
            raise NotFound(f"{key} is not retrievable, nothing to replicate")
        self._pins.setdefault(key, set()).add(node_id)
        return len(self._provider_ids(key))

    def unpin(self, node: NodeId, cid: CidLike) -> int:
        key = _key(cid)
        pinned = self._pins.get(key)
        if not pinned or node.id not in pinned:
            raise NotPinned(f"node {node.short()} does not pin {key}")
        pinned.discard(node.id)
        if not pinned:
            del self._pins[key]
        return len(self._provider_ids(key))

    # -- names ---------------------------------------------------------------

    def publish_name(self, node: NodeId, cid: CidLike, name: Optional[bytes] = None) -> NameRecord:
        """Point the name owned by ``node`` at ``cid``; bumps the version."""
        try:
            owns = node.owns_key()
        except MalformedKey:
            owns = False
        if not owns:
            raise Unauthorized(f"node {node.short()} cannot prove ownership of its key")
        if name is not None and _as_name(name) != node.id:
            raise Unauthorized("the publishing key does not hash to this name")
        cid = parse_cid(cid) if isinstance(cid, str) else cid
        prev = self._names.get(node.id)
        version = prev.version + 1 if prev else 1
        sig = sign(node.private_key, NameRecord.signed_bytes(node.id, version, cid))
        record = NameRecord(node.id, cid, version, sig)
        self._names[node.id] = record
        self._nodes.setdefault(node.id, node.public())
        return record

    def name_record(self, name: Union[bytes, CidV0]) -> NameRecord:
        key = _as_name(name)
        record = self._names.get(key)
        if record is None:
            raise UnknownName(f"name {key.hex()[:12]} was never published")
        return record

    def resolve_name(self, name: Union[bytes, CidV0]) -> CidV0:
        record = self.name_record(name)
        owner = self._nodes[record.name]
        signed = NameRecord.signed_bytes(record.name, record.version, record.current)
        if not verify(owner.public_key, signed, record.signature):  # pragma: no cover
            raise Unauthorized("name record signature does not verify")
        return record.current

    # -- export --------------------------------------------------------------

    def snapshot(self, view: str = "full") -> dict:
        """JSON-ready dump of objects, provider sets and name records.

        ``view="analyst"`` omits the node registry: an outside observer can
        ask who provides a known CID, but cannot list every node.
        """
        if view not in ("full", "analyst"):
            raise ValueError(f"unknown view {view!r}")
        objects = {}
        for key in sorted(self._objects):
            obj = self._objects[key]
            objects[key] = {
                "size": len(obj.data),
                "data_b64": base64.b64encode(obj.data).decode(),
                "links": [link.text for link in obj.links],
            }
        providers = {
            key: sorted(i.hex() for i in self._provider_ids(key))
            for key in sorted(self._objects)
        }
        names = {
            rec.name.hex(): {"current": rec.current.text, "version": rec.version}
            for rec in sorted(self._names.values(), key=lambda r: r.name)
        }
        out = {"view": view, "objects": objects, "providers": providers, "names": names}
        if view == "full":
            out["nodes"] = sorted(i.hex() for i in self._nodes)
        return out

    def stored_cids(self) -> List[str]:
        return sorted(self._objects)
