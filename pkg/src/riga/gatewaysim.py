"""Simulated HTTP gateways and the discrete-event clock they run on.

Time is in milliseconds of simulated time. A request never blocks the
event loop: :meth:`Gateway.request` decides the outcome and how long it took,
and the caller schedules its continuation ``elapsed_ms`` later. A dropped
request always costs the full timeout, like a blocking GET with a timeout.
"""
from __future__ import annotations

import heapq
import itertools
import json
import math
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Union

from .cidcodec import CidV0
from .rng import substream
from .storesim import NotFound, Store, UnknownName

__all__ = [
    "EmptyGatewayList",
    "Lognormal",
    "Fixed",
    "GatewayProfile",
    "Fetched",
    "Dropped",
    "Event",
    "SimClock",
    "RoundRobinState",
    "Gateway",
    "GatewayNet",
    "next_gateway",
    "request",
    "run_until",
    "load_profiles",
    "default_profiles",
]


class EmptyGatewayList(ValueError):
    pass


# -- latency models ----------------------------------------------------------


@dataclass(frozen=True)
class Lognormal:
    median_ms: float
    sigma: float

    def __post_init__(self):
        if not self.median_ms > 0:
            raise ValueError("median_ms must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    def sample(self, rng: random.Random) -> float:
        return rng.lognormvariate(math.log(self.median_ms), self.sigma)

    @property
    def mean_ms(self) -> float:
        return self.median_ms * math.exp(self.sigma**2 / 2)

    def to_dict(self) -> dict:
        return {"type": "lognormal", "median_ms": self.median_ms, "sigma": self.sigma}


@dataclass(frozen=True)
class Fixed:
    ms: float

    def __post_init__(self):
        if not self.ms > 0:
            raise ValueError("fixed latency must be positive")

    def sample(self, rng: random.Random) -> float:
        return float(self.ms)

    @property
    def median_ms(self) -> float:
        return float(self.ms)

    @property
    def mean_ms(self) -> float:
        return float(self.ms)

    def to_dict(self) -> dict:
        return {"type": "fixed", "ms": self.ms}


LatencyModel = Union[Lognormal, Fixed]


def model_from_dict(d: dict) -> LatencyModel:
    kind = d.get("type")
    if kind == "lognormal":
        return Lognormal(float(d["median_ms"]), float(d["sigma"]))
    if kind == "fixed":
        return Fixed(float(d["ms"]))
    raise ValueError(f"unknown latency model type {kind!r}")


@dataclass
class GatewayProfile:
    """Configuration plus running counters for one gateway.

    ``min_interval_ms`` turns on a per-client rate limiter; it is off by
    default because public gateways were observed not to throttle at one
    request every two seconds.
    """

    name: str
    model: LatencyModel
    availability: float = 1.0
    min_interval_ms: Optional[float] = None
    requests_total: int = 0
    fetched_total: int = 0
    dropped_total: int = 0

    def __post_init__(self):
        if not 0.0 <= self.availability <= 1.0:
            raise ValueError(f"{self.name}: availability must be in [0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "GatewayProfile":
        return cls(
            name=str(d["name"]),
            model=model_from_dict(d["model"]),
            availability=float(d.get("availability", 1.0)),
            min_interval_ms=d.get("min_interval_ms"),
        )

    def to_dict(self) -> dict:
        out = {"name": self.name, "model": self.model.to_dict(), "availability": self.availability}
        if self.min_interval_ms is not None:
            out["min_interval_ms"] = self.min_interval_ms
        return out

    def stats(self) -> dict:
        return {
            "requests_total": self.requests_total,
            "fetched_total": self.fetched_total,
            "dropped_total": self.dropped_total,
        }


def load_profiles(source: Union[str, Path, list, dict, None] = None) -> List[GatewayProfile]:
    """Read gateway profiles from a path, parsed JSON, or the bundled defaults."""
    if source is None:
        doc = json.loads(resources.files("riga").joinpath("data/gateways.json").read_text())
    elif isinstance(source, (str, Path)):
        doc = json.loads(Path(source).read_text())
    else:
        doc = source
    entries = doc["gateways"] if isinstance(doc, dict) else doc
    profiles = [GatewayProfile.from_dict(e) for e in entries]
    names = [p.name for p in profiles]
    if len(set(names)) != len(names):
        raise ValueError("gateway names must be unique")
    return profiles


def default_profiles() -> List[GatewayProfile]:
    return load_profiles(None)


# -- outcomes ----------------------------------------------------------------


@dataclass(frozen=True)
class Fetched:
    data: bytes = field(repr=False)
    latency_ms: float
    gateway: str

    ok = True

    @property
    def elapsed_ms(self) -> float:
        return self.latency_ms


@dataclass(frozen=True)
class Dropped:
    elapsed_ms: float
    gateway: str
    # timeout | unavailable | not_found | throttled; clients must not branch on it
    reason: str

    ok = False


# -- clock -------------------------------------------------------------------


@dataclass(order=True)
class Event:
    time_ms: float
    seq: int
    label: str = field(compare=False, default="")
    action: Optional[Callable[["SimClock"], None]] = field(compare=False, default=None, repr=False)


class SimClock:
    """Event queue ordered by (time, insertion sequence)."""

    def __init__(self, now_ms: float = 0.0):
        self.now = float(now_ms)
        self._queue: List[Event] = []
        self._seq = itertools.count()
        self.fired = 0

    def schedule_at(self, time_ms: float, action=None, label: str = "") -> Event:
        if time_ms < self.now:
            raise ValueError(f"cannot schedule at {time_ms} ms, clock is at {self.now} ms")
        ev = Event(float(time_ms), next(self._seq), label, action)
        heapq.heappush(self._queue, ev)
        return ev

    def schedule(self, delay_ms: float, action=None, label: str = "") -> Event:
        if delay_ms < 0:
            raise ValueError("delay must be non-negative")
        return self.schedule_at(self.now + delay_ms, action, label)

    def pending(self) -> int:
        return len(self._queue)

    def peek(self) -> Optional[float]:
        return self._queue[0].time_ms if self._queue else None

    def run_until(self, t_ms: float) -> List[Event]:
        if t_ms < self.now:
            raise ValueError(f"cannot run backwards to {t_ms} ms from {self.now} ms")
        fired = []
        while self._queue and self._queue[0].time_ms <= t_ms:
            ev = heapq.heappop(self._queue)
            self.now = ev.time_ms
            if ev.action is not None:
                ev.action(self)
            fired.append(ev)
        self.fired += len(fired)
        self.now = float(t_ms)
        return fired


def run_until(clock: SimClock, t_ms: float) -> List[Event]:
    return clock.run_until(t_ms)


# -- selection ---------------------------------------------------------------


class RoundRobinState:
    def __init__(self, gateways: Sequence, cursor: int = 0):
        self.gateways = list(gateways)
        if not self.gateways:
            raise EmptyGatewayList("round-robin needs at least one gateway")
        self.cursor = cursor % len(self.gateways)

    def next(self):
        gw = self.gateways[self.cursor]
        self.cursor = (self.cursor + 1) % len(self.gateways)
        return gw

    def __len__(self) -> int:
        return len(self.gateways)


def next_gateway(rr: RoundRobinState):
    return rr.next()


# -- gateways ----------------------------------------------------------------


class Gateway:
    """A profile bound to a store and its own latency substream."""

    def __init__(self, profile: GatewayProfile, store: Store, rng: random.Random):
        self.profile = profile
        self.store = store
        self.rng = rng
        self._last_seen: Dict[object, float] = {}

    @property
    def name(self) -> str:
        return self.profile.name

    def _admit(self, timeout_ms: float, clock: SimClock, client):
        """Common front half of a request: sample, roll availability, throttle."""
        if not timeout_ms > 0:
            raise ValueError("timeout_ms must be positive")
        prof = self.profile
        prof.requests_total += 1
        # draw both numbers every time so outcomes never shift the stream
        latency = prof.model.sample(self.rng)
        up = self.rng.random() < prof.availability
        if prof.min_interval_ms is not None and client is not None:
            last = self._last_seen.get(client)
            self._last_seen[client] = clock.now
            if last is not None and clock.now - last < prof.min_interval_ms:
                return latency, "throttled"
        if not up:
            return latency, "unavailable"
        if latency > timeout_ms:
            return latency, "timeout"
        return latency, None

    def _finish(self, latency, reason, timeout_ms, data) -> Union[Fetched, Dropped]:
        if reason is None and data is None:
            reason = "not_found"
        if reason is not None:
            self.profile.dropped_total += 1
            if reason == "throttled":
                return Dropped(min(latency, timeout_ms), self.name, reason)
            return Dropped(float(timeout_ms), self.name, reason)
        self.profile.fetched_total += 1
        return Fetched(data, latency, self.name)

    def request(self, cid: Union[CidV0, str], timeout_ms: float, clock: SimClock, client=None):
        """GET /ipfs/<cid>. Returns :class:`Fetched` or :class:`Dropped`."""
        latency, reason = self._admit(timeout_ms, clock, client)
        data = None
        if reason is None:
            try:
                data = self.store.get_object(cid)
            except NotFound:
                data = None
        return self._finish(latency, reason, timeout_ms, data)

    def request_name(self, name, timeout_ms: float, clock: SimClock, client=None):
        """GET /ipns/<name>: resolve through the registry, then fetch."""
        latency, reason = self._admit(timeout_ms, clock, client)
        data = None
        if reason is None:
            try:
                data = self.store.get_object(self.store.resolve_name(name))
            except (NotFound, UnknownName):
                data = None
        return self._finish(latency, reason, timeout_ms, data)


def request(gw: Gateway, cid, timeout_ms: float, clock: SimClock, client=None):
    return gw.request(cid, timeout_ms, clock, client)


class GatewayNet:
    """Every configured gateway in front of one store.

    Each gateway draws latencies from its own substream of ``master_seed``, so
    adding or removing a gateway leaves the others' samples untouched.
    """

    def __init__(self, profiles: Iterable[GatewayProfile], store: Store, master_seed: int = 0):
        self.store = store
        self.master_seed = master_seed
        self.gateways: List[Gateway] = [
            Gateway(p, store, substream(master_seed, "gateway", p.name)) for p in profiles
        ]
        self.by_name = {g.name: g for g in self.gateways}

    def __iter__(self):
        return iter(self.gateways)

    def __len__(self) -> int:
        return len(self.gateways)

    def __getitem__(self, name: str) -> Gateway:
        return self.by_name[name]

    def fastest(self, n: int) -> List[Gateway]:
        """The ``n`` gateways with the lowest median latency (ties by name)."""
        return sorted(self.gateways, key=lambda g: (g.profile.model.median_ms, g.name))[:n]

    def stats(self) -> Dict[str, dict]:
        return {g.name: g.profile.stats() for g in self.gateways}
