"""Gateway timing probe.

Fetches a list of CIDs sequentially from each gateway with a timeout and a
minimum gap between requests, and reports per-gateway total time and dropped
count. The same code drives live HTTP gateways and the simulated ones
(:class:`SimTransport`), so both produce the same report schema.

Guardrails: requests are spaced at least ``rate_limit_s`` apart (2 s by
default, never under 1 s without ``allow_fast``), the total request count is
capped, and the probe only ever issues GETs.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import requests

from .cidcodec import CodecError, parse_cid
from .gatewaysim import GatewayNet, SimClock

log = logging.getLogger(__name__)

__all__ = [
    "PlanError",
    "ProbePlan",
    "ProbeOutcome",
    "GatewayStats",
    "ProbeReport",
    "WallClock",
    "VirtualClock",
    "HttpTransport",
    "SimTransport",
    "probe_once",
    "run_plan",
    "timing_rows",
    "default_plan",
]

DEFAULT_RATE_S = 2.0
MIN_RATE_S = 1.0
DEFAULT_CAP = 2000


class PlanError(ValueError):
    pass


@dataclass
class ProbePlan:
    gateways: List[str]
    cids: List[str]
    repeats: int = 1
    rate_limit_s: float = DEFAULT_RATE_S
    timeout_ms: float = 3000.0
    max_requests: int = DEFAULT_CAP
    allow_fast: bool = False

    def __post_init__(self):
        self.gateways = [g.rstrip("/") for g in self.gateways]
        for c in self.cids:
            try:
                parse_cid(c)
            except CodecError as exc:
                raise PlanError(f"bad CID {c!r}: {exc}") from exc
        if self.repeats < 0:
            raise PlanError("repeats must be >= 0")
        if not self.timeout_ms > 0:
            raise PlanError("timeout_ms must be positive")
        if self.rate_limit_s < MIN_RATE_S and not self.allow_fast:
            raise PlanError(
                f"rate limit {self.rate_limit_s}s is below {MIN_RATE_S}s; pass allow_fast to override"
            )
        if self.rate_limit_s < 0:
            raise PlanError("rate limit cannot be negative")
        if self.request_count > self.max_requests:
            raise PlanError(
                f"plan issues {self.request_count} requests, cap is {self.max_requests}"
            )

    @property
    def request_count(self) -> int:
        return self.repeats * len(self.cids) * len(self.gateways)

    @classmethod
    def from_dict(cls, d: dict, **overrides) -> "ProbePlan":
        fields = {
            "gateways": list(d.get("gateways", [])),
            "cids": list(d.get("cids", [])),
            "repeats": int(d.get("repeats", 1)),
            "rate_limit_s": float(d.get("rate_limit_s", DEFAULT_RATE_S)),
            "timeout_ms": float(d.get("timeout_ms", 3000)),
            "max_requests": int(d.get("max_requests", DEFAULT_CAP)),
            "allow_fast": bool(d.get("allow_fast", False)),
        }
        fields.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**fields)

    @classmethod
    def load(cls, path: Union[str, Path], **overrides) -> "ProbePlan":
        return cls.from_dict(json.loads(Path(path).read_text()), **overrides)

    def to_dict(self) -> dict:
        return {
            "gateways": list(self.gateways),
            "cids": list(self.cids),
            "repeats": self.repeats,
            "rate_limit_s": self.rate_limit_s,
            "timeout_ms": self.timeout_ms,
            "max_requests": self.max_requests,
            "allow_fast": self.allow_fast,
        }


def default_plan() -> ProbePlan:
    doc = json.loads(resources.files("riga").joinpath("data/probe_plan.json").read_text())
    return ProbePlan.from_dict(doc)


# -- clocks and transports ---------------------------------------------------


class WallClock:
    def now_ms(self) -> float:
        return time.monotonic() * 1000.0

    def sleep_ms(self, ms: float) -> None:
        if ms > 0:
            time.sleep(ms / 1000.0)

    def wall(self) -> float:
        return time.time()


class VirtualClock:
    """Simulated time for shim runs; sleeping just moves the clock."""

    def __init__(self, epoch: float = 0.0):
        self.sim = SimClock()
        self.epoch = epoch

    def now_ms(self) -> float:
        return self.sim.now

    def sleep_ms(self, ms: float) -> None:
        if ms > 0:
            self.sim.run_until(self.sim.now + ms)

    def wall(self) -> float:
        return self.epoch + self.sim.now / 1000.0


def _check_url(url: str) -> None:
    if not url.startswith(("http://", "https://")):
        raise PlanError(f"gateway {url!r} is not an http(s) URL")


class HttpTransport:
    """Plain ``GET {gateway}/ipfs/{cid}``, redirects followed, no custom headers."""

    def __init__(self, session: Optional[requests.Session] = None):
        self.session = session or requests.Session()
        self.clock = WallClock()

    def fetch(self, gateway_url: str, cid: str, timeout_ms: float):
        _check_url(gateway_url)
        url = f"{gateway_url.rstrip('/')}/ipfs/{cid}"
        start = time.perf_counter()
        try:
            resp = self.session.get(url, timeout=timeout_ms / 1000.0, allow_redirects=True)
            ok = resp.ok and len(resp.content) > 0
        except requests.RequestException as exc:
            log.debug("GET %s failed: %s", url, exc)
            ok = False
        return ok, (time.perf_counter() - start) * 1000.0


class SimTransport:
    """Routes probe requests to simulated gateways keyed by base URL."""

    def __init__(self, net: GatewayNet, clock: Optional[VirtualClock] = None):
        self.net = net
        self.clock = clock or VirtualClock()

    def fetch(self, gateway_url: str, cid: str, timeout_ms: float):
        gw = self.net[gateway_url.rstrip("/")]
        res = gw.request(cid, timeout_ms, self.clock.sim)
        self.clock.sleep_ms(res.elapsed_ms)
        return res.ok, res.elapsed_ms


# -- probing -----------------------------------------------------------------


@dataclass(frozen=True)
class ProbeOutcome:
    latency_ms: float
    dropped: bool


def probe_once(gateway_url: str, cid: str, timeout_ms: float, transport=None) -> ProbeOutcome:
    """One timed GET; errors and overruns count as dropped at ``timeout_ms``."""
    parse_cid(cid)
    transport = transport or HttpTransport()
    if isinstance(transport, HttpTransport):
        _check_url(gateway_url)
    ok, elapsed = transport.fetch(gateway_url, cid, timeout_ms)
    if not ok or elapsed > timeout_ms:
        return ProbeOutcome(float(timeout_ms), True)
    return ProbeOutcome(elapsed, False)


@dataclass
class GatewayStats:
    latencies_ms: List[float] = field(default_factory=list)
    timestamps_ms: List[float] = field(default_factory=list)
    dropped_count: int = 0

    @property
    def requests(self) -> int:
        return len(self.latencies_ms)

    @property
    def total_time_ms(self) -> float:
        return sum(self.latencies_ms)

    def to_dict(self) -> dict:
        return {
            "requests": self.requests,
            "total_time_ms": self.total_time_ms,
            "dropped_count": self.dropped_count,
            "latencies_ms": list(self.latencies_ms),
            "timestamps_ms": list(self.timestamps_ms),
        }


@dataclass
class ProbeReport:
    plan: ProbePlan
    gateways: Dict[str, GatewayStats]
    started_at: float = 0.0
    ended_at: float = 0.0
    complete: bool = True

    @property
    def timeout_ms(self) -> float:
        return self.plan.timeout_ms

    def min_gap_ms(self) -> Optional[float]:
        """Smallest gap between consecutive request starts across the run."""
        stamps = sorted(t for s in self.gateways.values() for t in s.timestamps_ms)
        gaps = [b - a for a, b in zip(stamps, stamps[1:])]
        return min(gaps) if gaps else None

    def to_dict(self) -> dict:
        return {
            "plan": self.plan.to_dict(),
            "timeout_ms": self.plan.timeout_ms,
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "complete": self.complete,
            "gateways": {name: st.to_dict() for name, st in self.gateways.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def run_plan(plan: ProbePlan, transport=None) -> ProbeReport:
    transport = transport or HttpTransport()
    if isinstance(transport, HttpTransport):
        for g in plan.gateways:
            _check_url(g)
    clock = transport.clock
    report = ProbeReport(plan, {g: GatewayStats() for g in plan.gateways})
    if plan.request_count == 0:
        report.gateways = {}
        report.started_at = report.ended_at = clock.wall()
        return report
    report.started_at = clock.wall()
    origin = clock.now_ms()
    gap_ms = plan.rate_limit_s * 1000.0
    last_start = None
    try:
        for gw in plan.gateways:
            stats = report.gateways[gw]
            for cid in plan.cids:
                for _ in range(plan.repeats):
                    if last_start is not None:
                        clock.sleep_ms(last_start + gap_ms - clock.now_ms())
                    last_start = clock.now_ms()
                    out = probe_once(gw, cid, plan.timeout_ms, transport)
                    stats.timestamps_ms.append(last_start - origin)
                    stats.latencies_ms.append(out.latency_ms)
                    stats.dropped_count += out.dropped
            log.info("%s: %d requests, %d dropped", gw, stats.requests, stats.dropped_count)
    except KeyboardInterrupt:
        log.warning("probe interrupted; report is partial")
        report.complete = False
    report.ended_at = clock.wall()
    return report


def timing_rows(reports: Dict[float, ProbeReport]) -> List[dict]:
    """One row per gateway with total time and drops under each timeout."""
    timeouts = sorted(reports, reverse=True)
    names: List[str] = []
    for t in timeouts:
        for name in reports[t].gateways:
            if name not in names:
                names.append(name)
    rows = []
    for name in names:
        row = {"gateway": name}
        for t in timeouts:
            st = reports[t].gateways.get(name, GatewayStats())
            tag = f"{int(t)}ms"
            row[f"requests@{tag}"] = st.requests
            row[f"total_time_ms@{tag}"] = st.total_time_ms
            row[f"dropped@{tag}"] = st.dropped_count
        rows.append(row)
    return rows


def rows_to_tsv(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    lines = ["\t".join(cols)]
    for r in rows:
        lines.append("\t".join(f"{r[c]:.3f}" if isinstance(r[c], float) else str(r[c]) for c in cols))
    return "\n".join(lines) + "\n"
