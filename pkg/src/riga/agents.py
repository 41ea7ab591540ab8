"""Botmaster and bot actors for the simulated campaign.

Wire format of a command envelope::

    kind (1 byte) || payload length (4 bytes, big-endian) || payload || Ed25519 signature (64 bytes)

The signature covers everything before it. ``kind`` is 1 for a direct
command and 2 for a redirect, whose payload is the 32-byte digest of a
mutable name (a rendezvous point the botmaster fills in later).

Bots are event-driven actors on a shared :class:`~riga.gatewaysim.SimClock`.
A tick performs its gateway requests back to back, reading store state as it
is when the tick fires, and schedules the next tick exactly one tick interval
later, so counter ``c`` is always polled at ``start + c * tick``. Requests of
consecutive ticks may therefore overlap in simulated time.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .cidcodec import CidV0, cid_from_digest, cid_of_content, parse_cid
from .gatewaysim import Fetched, Gateway, RoundRobinState, SimClock
from .keys import MalformedKey, NodeId, sign, verify
from .rigacore import AnchorSet, Campaign, CounterDomain, SkewedPrng, plan_campaign
from .storesim import BLOCK_SIZE, NotFound, NotPinned, Store

__all__ = [
    "Kind",
    "MalformedEnvelope",
    "AnchorMismatch",
    "CommandEnvelope",
    "sign_envelope",
    "verify_envelope",
    "authenticate",
    "NoContent",
    "Executed",
    "Redirected",
    "ExecutionRecord",
    "BotCampaign",
    "BotState",
    "Bot",
    "Botmaster",
    "RendezvousBoard",
    "NotFoundMarker",
    "bot_tick",
    "publish_command",
    "push_feedback",
    "collect_feedback",
    "check_safety",
]

SIGNATURE_LEN = 64
_HEADER = struct.Struct(">BI")


class Kind(enum.IntEnum):
    DIRECT = 1
    REDIRECT = 2


class MalformedEnvelope(ValueError):
    pass


class AnchorMismatch(ValueError):
    pass


@dataclass(frozen=True)
class CommandEnvelope:
    kind: Kind
    payload: bytes
    signature: bytes
    # not on the wire; filled in once a trusted key verifies the envelope
    signer: Optional[bytes] = None

    @staticmethod
    def signed_part(kind: Kind, payload: bytes) -> bytes:
        return _HEADER.pack(int(kind), len(payload)) + payload

    def serialize(self) -> bytes:
        return self.signed_part(self.kind, self.payload) + self.signature

    @classmethod
    def parse(cls, data: bytes) -> "CommandEnvelope":
        if len(data) < _HEADER.size + SIGNATURE_LEN:
            raise MalformedEnvelope("too short to be an envelope")
        kind, length = _HEADER.unpack_from(data)
        try:
            kind = Kind(kind)
        except ValueError:
            raise MalformedEnvelope(f"unknown kind byte {kind}") from None
        end = _HEADER.size + length
        if len(data) != end + SIGNATURE_LEN:
            raise MalformedEnvelope("length field does not match envelope size")
        payload = bytes(data[_HEADER.size : end])
        if kind is Kind.REDIRECT and len(payload) != 32:
            raise MalformedEnvelope("redirect payload must be a 32-byte name")
        return cls(kind, payload, bytes(data[end:]))

    @property
    def command(self) -> str:
        return self.payload.decode("utf-8", errors="replace")


def sign_envelope(kind: Kind, payload: bytes, private_key: bytes) -> CommandEnvelope:
    kind = Kind(kind)
    payload = bytes(payload)
    node = NodeId.from_private(private_key)
    sig = sign(private_key, CommandEnvelope.signed_part(kind, payload))
    return CommandEnvelope(kind, payload, sig, node.public_key)


def verify_envelope(envelope: CommandEnvelope, trusted_keys: Optional[Iterable[bytes]] = None) -> bool:
    """Check the signature; with ``trusted_keys``, the signer must also be one of them.

    An envelope parsed off the wire carries no signer, so every trusted key
    is tried in turn.
    """
    if len(envelope.signature) != SIGNATURE_LEN:
        return False
    msg = CommandEnvelope.signed_part(envelope.kind, envelope.payload)
    if trusted_keys is None:
        if envelope.signer is None:
            return False
        return verify(envelope.signer, msg, envelope.signature)
    keys = [bytes(k) for k in trusted_keys]
    if envelope.signer is not None:
        return envelope.signer in keys and verify(envelope.signer, msg, envelope.signature)
    return any(verify(k, msg, envelope.signature) for k in keys)


def authenticate(data: bytes, trusted_keys: Sequence[bytes]) -> Optional[CommandEnvelope]:
    """Parse and verify fetched bytes; ``None`` for anything a bot must ignore."""
    try:
        env = CommandEnvelope.parse(data)
    except MalformedEnvelope:
        return None
    msg = CommandEnvelope.signed_part(env.kind, env.payload)
    for key in trusted_keys:
        try:
            ok = verify(key, msg, env.signature)
        except MalformedKey:
            continue
        if ok:
            return CommandEnvelope(env.kind, env.payload, env.signature, bytes(key))
    return None


# -- poll outcomes -----------------------------------------------------------


@dataclass(frozen=True)
class NoContent:
    counter: int
    name = "no_content"


@dataclass(frozen=True)
class Executed:
    counter: int
    command: bytes
    via: Optional[bytes] = None
    name = "executed"


@dataclass(frozen=True)
class Redirected:
    counter: int
    rendezvous: bytes
    name = "redirected"


PollOutcome = Union[NoContent, Executed, Redirected]


@dataclass(frozen=True)
class ExecutionRecord:
    counter: int
    command: bytes
    sim_time_ms: float
    envelope: bytes = field(repr=False)
    signer: bytes = field(repr=False)
    via: Optional[bytes] = None


# -- bots --------------------------------------------------------------------


def _identity(data: bytes) -> bytes:
    return data


@dataclass
class BotCampaign:
    """What a bot is shipped with.

    ``extractor`` turns fetched bytes into an envelope; the default passes
    content through unchanged (hiding commands inside other media is out of
    scope). ``attempts`` is how many gateways are tried for one counter before
    giving up; ``lookback`` > 0 re-polls counter ``c - lookback`` on every tick.
    """

    prng: SkewedPrng
    domain: CounterDomain
    trusted_keys: Tuple[bytes, ...]
    gateways: Sequence[Gateway]
    timeout_ms: float = 3000.0
    attempts: int = 1
    lookback: int = 0
    extractor: Callable[[bytes], bytes] = _identity

    def __post_init__(self):
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")
        if self.lookback < 0:
            raise ValueError("lookback must be >= 0")
        if not self.timeout_ms > 0:
            raise ValueError("timeout_ms must be positive")

    @classmethod
    def from_campaign(cls, campaign: Campaign, gateways: Sequence[Gateway], **kw) -> "BotCampaign":
        return cls(
            prng=campaign.prng(),
            domain=campaign.domain,
            trusted_keys=tuple(bytes.fromhex(k) for k in campaign.trusted_keys),
            gateways=gateways,
            **kw,
        )


@dataclass
class BotState:
    bot_id: NodeId
    counter: int
    campaign: BotCampaign
    executed: List[ExecutionRecord] = field(default_factory=list)
    is_seeder: bool = False
    pending_redirects: List[bytes] = field(default_factory=list)


class Bot:
    """One infected device polling the RIGA stream through public gateways."""

    def __init__(self, node: NodeId, campaign: BotCampaign, store: Store,
                 is_seeder: bool = False, cursor: int = 0, trace: Optional[list] = None):
        self.node = node
        self.store = store
        self.state = BotState(node, campaign.domain.start, campaign, is_seeder=is_seeder)
        self.rr = RoundRobinState(campaign.gateways, cursor)
        self.trace = trace if trace is not None else []
        self.finished = False
        self._redirect_turn = 0
        store.register_node(node)

    @property
    def counter(self) -> int:
        return self.state.counter

    @property
    def executed(self) -> List[ExecutionRecord]:
        return self.state.executed

    def start(self, clock: SimClock, at_ms: Optional[float] = None) -> None:
        when = clock.now if at_ms is None else at_ms
        clock.schedule_at(when, self._on_tick, label=f"tick {self.node.short()}")

    def _on_tick(self, clock: SimClock) -> None:
        self.tick(clock, schedule_next=True)

    # requests ---------------------------------------------------------------

    def _fetch(self, target, clock: SimClock, by_name: bool):
        """Try up to ``attempts`` gateways in round-robin order."""
        camp = self.state.campaign
        elapsed = 0.0
        res = None
        for _ in range(camp.attempts):
            gw = self.rr.next()
            if by_name:
                res = gw.request_name(target, camp.timeout_ms, clock, client=self.node.id)
            else:
                res = gw.request(target, camp.timeout_ms, clock, client=self.node.id)
            elapsed += res.elapsed_ms
            if isinstance(res, Fetched):
                break
        return res, elapsed

    def _log(self, t: float, counter: int, res, latency: float, outcome: str, kind: str) -> None:
        self.trace.append({
            "sim_time_ms": round(t, 6),
            "bot_id": self.node.hex,
            "counter": counter,
            "gateway": res.gateway,
            "outcome": outcome,
            "latency_ms": round(latency, 6),
            "kind": kind,
        })

    def _execute(self, env: CommandEnvelope, counter: int, t: float, via: Optional[bytes] = None) -> Executed:
        self.state.executed.append(
            ExecutionRecord(counter, env.payload, t, env.serialize(), env.signer, via)
        )
        return Executed(counter, env.payload, via)

    def _seed(self, data: bytes) -> None:
        if self.state.is_seeder:
            try:
                self.store.pin(self.node, cid_of_content(data))
            except NotFound:
                pass

    def _poll_counter(self, counter: int, clock: SimClock, offset: float, kind: str):
        camp = self.state.campaign
        cid = camp.prng.uri_at(counter)
        res, elapsed = self._fetch(cid, clock, by_name=False)
        outcome: PollOutcome = NoContent(counter)
        t_done = clock.now + offset + elapsed
        if isinstance(res, Fetched):
            env = authenticate(camp.extractor(res.data), camp.trusted_keys)
            if env is not None:
                self._seed(res.data)
                if env.kind is Kind.DIRECT:
                    outcome = self._execute(env, counter, t_done)
                else:
                    outcome, res, extra = self._follow(env.payload, counter, clock, offset + elapsed)
                    elapsed += extra
        self._log(clock.now + offset, counter, res, elapsed, outcome.name, kind)
        return outcome, elapsed

    def _follow(self, name: bytes, counter: int, clock: SimClock, offset: float):
        """Resolve a rendezvous name; remember it if it is still an empty placeholder."""
        camp = self.state.campaign
        res, elapsed = self._fetch(cid_from_digest(name), clock, by_name=True)
        if isinstance(res, Fetched):
            env = authenticate(camp.extractor(res.data), camp.trusted_keys)
            # redirect chains are not followed
            if env is not None and env.kind is Kind.DIRECT:
                if name in self.state.pending_redirects:
                    self.state.pending_redirects.remove(name)
                return self._execute(env, counter, clock.now + offset + elapsed, via=name), res, elapsed
        if name not in self.state.pending_redirects:
            self.state.pending_redirects.append(name)
        return Redirected(counter, name), res, elapsed

    def tick(self, clock: SimClock, schedule_next: bool = False) -> PollOutcome:
        st = self.state
        camp = st.campaign
        if st.counter > camp.domain.upper:
            self.finished = True
            return NoContent(st.counter)
        counter = st.counter
        outcome, elapsed = self._poll_counter(counter, clock, 0.0, "riga")
        if camp.lookback and counter - camp.lookback >= camp.domain.start:
            _, extra = self._poll_counter(counter - camp.lookback, clock, elapsed, "lookback")
            elapsed += extra
        if st.pending_redirects and not isinstance(outcome, Redirected):
            name = st.pending_redirects[self._redirect_turn % len(st.pending_redirects)]
            self._redirect_turn += 1
            follow, res, extra = self._follow(name, counter, clock, elapsed)
            self._log(clock.now + elapsed, counter, res, extra, follow.name, "rendezvous")
            elapsed += extra
        st.counter = counter + 1
        if st.counter > camp.domain.upper:
            self.finished = True
        elif schedule_next:
            # fixed cadence: a slow request does not push the next counter back
            clock.schedule(camp.domain.tick_interval * 1000.0, self._on_tick, label=f"tick {self.node.short()}")
        return outcome


def bot_tick(bot: Bot, clock: SimClock) -> PollOutcome:
    return bot.tick(clock)


# -- botmaster ---------------------------------------------------------------


@dataclass
class RendezvousBoard:
    """A mutable name whose current object lists every posted entry CID.

    Bots must be able to republish the name, so they carry its key.
    """

    node: NodeId
    entries: List[CidV0] = field(default_factory=list)
    pending_unpins: List[Tuple[NodeId, CidV0]] = field(default_factory=list)

    @property
    def name(self) -> bytes:
        return self.node.id


def _encode_listing(entries: Sequence[CidV0]) -> bytes:
    return "\n".join(c.text for c in entries).encode()


def _decode_listing(data: bytes) -> List[str]:
    return [line for line in data.decode().split("\n") if line]


class Botmaster:
    def __init__(self, store: Store, identity: NodeId):
        if identity.private_key is None:
            raise MalformedKey("the botmaster needs its private key")
        self.store = store
        self.identity = identity
        self.node = store.register_node(identity)
        self.campaign: Optional[Campaign] = None
        self.planned: List[bytes] = []
        self._names: Dict[str, NodeId] = {}

    @property
    def public_key(self) -> bytes:
        return self.identity.public_key

    def sign(self, kind: Kind, payload: bytes) -> CommandEnvelope:
        return sign_envelope(kind, payload, self.identity.private_key)

    def plan(self, envelopes: Sequence[CommandEnvelope], counters: Sequence[int],
             domain: Optional[CounterDomain] = None, shuffle_seed: int = 0, **kw) -> Campaign:
        blobs = [e.serialize() for e in envelopes]
        for b in blobs:
            if len(b) > BLOCK_SIZE:
                raise ValueError("anchored envelopes must fit in one block")
        prng, cids = plan_campaign(blobs, counters, **kw)
        anchors = AnchorSet.from_pairs([(c, cid.digest) for c, cid in zip(counters, cids)])
        self.campaign = Campaign(
            prime=prng.prime,
            anchors=anchors,
            domain=domain or CounterDomain(),
            shuffle_seed=shuffle_seed,
            trusted_keys=(self.public_key.hex(),),
        )
        self.planned = blobs
        return self.campaign

    def rendezvous(self, label: str) -> NodeId:
        """A fresh name key for a placeholder the botmaster fills in later."""
        node = self._names.get(label)
        if node is None:
            node = NodeId.from_seed(self.identity.id, "rendezvous", label)
            self.store.register_node(node)
            self._names[label] = node
        return node

    def fill_rendezvous(self, name_node: NodeId, envelope: CommandEnvelope):
        cid = self.store.put_object(self.node, envelope.serialize())
        return self.store.publish_name(name_node, cid)

    def open_board(self, label: str = "board") -> RendezvousBoard:
        node = self.rendezvous(label)
        listing = self.store.put_object(self.node, _encode_listing([]))
        self.store.publish_name(node, listing)
        return RendezvousBoard(node)


def publish_command(botmaster: Botmaster, envelope: CommandEnvelope, anchor_index: int,
                    extra_seeders: Sequence = ()) -> CidV0:
    """Upload the envelope planned for ``anchor_index``; seeders pin it right away."""
    if botmaster.campaign is None:
        raise AnchorMismatch("no campaign has been planned")
    planned = botmaster.campaign.anchor_cids[anchor_index]
    blob = envelope.serialize()
    if len(blob) > BLOCK_SIZE or cid_of_content(blob) != planned:
        raise AnchorMismatch(f"envelope does not hash to planned anchor {planned.text}")
    cid = botmaster.store.put_object(botmaster.node, blob)
    for seeder in extra_seeders:
        node = getattr(seeder, "node", seeder)
        botmaster.store.pin(node, cid)
    return cid


# -- feedback ----------------------------------------------------------------


@dataclass(frozen=True)
class NotFoundMarker:
    cid: CidV0


def push_feedback(bot, info: bytes, board: RendezvousBoard, unpin_after: bool = False) -> CidV0:
    """Store ``info`` with the bot as provider and append it to the board.

    With ``unpin_after`` the bot drops the object once the botmaster has
    collected it, leaving nothing for a later observer to fetch.
    """
    node = getattr(bot, "node", bot)
    store: Store = bot.store
    current = store.resolve_name(board.name)  # UnknownName for an unopened board
    try:
        entries = _decode_listing(store.get_object(current))
    except NotFound:
        entries = [c.text for c in board.entries]
    cid = store.put_object(node, info)
    entries.append(cid.text)
    listing = store.put_object(node, "\n".join(entries).encode())
    store.publish_name(board.node, listing)
    board.entries.append(cid)
    if unpin_after:
        board.pending_unpins.append((node, cid))
    return cid


def collect_feedback(botmaster: Botmaster, board: RendezvousBoard) -> List[Union[bytes, NotFoundMarker]]:
    store = botmaster.store
    listing_cid = store.resolve_name(board.name)
    out: List[Union[bytes, NotFoundMarker]] = []
    for text in _decode_listing(store.get_object(listing_cid)):
        try:
            out.append(store.get_object(text))
        except NotFound:
            out.append(NotFoundMarker(parse_cid(text)))
    for node, cid in board.pending_unpins:
        try:
            store.unpin(node, cid)
        except NotPinned:
            pass
    board.pending_unpins.clear()
    return out


def check_safety(bots: Iterable[Bot], trusted_keys: Sequence[bytes]) -> List[str]:
    """Re-verify every execution; returns a list of violations (empty is good)."""
    problems = []
    trusted = [bytes(k) for k in trusted_keys]
    for bot in bots:
        for rec in bot.executed:
            env = authenticate(rec.envelope, trusted)
            if env is None or env.signer != rec.signer or env.kind is not Kind.DIRECT:
                problems.append(f"bot {bot.node.short()} executed an unverified envelope at counter {rec.counter}")
    return problems
