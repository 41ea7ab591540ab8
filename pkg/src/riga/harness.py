"""Simulation assembly and experiment replays.

Everything here is a pure function of the config and the master seed: node
keys, gateway latency streams, experiment content and timing all derive from
named substreams of that seed. Reports are serialized with sorted keys so two
runs can be diffed byte for byte.
"""
from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .agents import (
    Bot,
    BotCampaign,
    Botmaster,
    CommandEnvelope,
    Kind,
    check_safety,
    publish_command,
)
from .gatewaysim import (
    Fetched,
    GatewayNet,
    GatewayProfile,
    Lognormal,
    SimClock,
    load_profiles,
)
from .keys import NodeId
from .probe import ProbePlan, SimTransport, VirtualClock, run_plan, timing_rows
from .rigacore import Campaign, CounterDomain
from .rng import substream, substream_seed
from .storesim import Store

__all__ = [
    "ConfigError",
    "CommandSpec",
    "SimConfig",
    "Simulation",
    "run_simulation",
    "availability_experiment",
    "gateway_matrix_experiment",
    "theoretical_availability_mean",
    "calibrate_lognormal",
    "summarize",
    "dumps",
]

EXPERIMENTS = (None, "availability", "gateway_matrix")


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        where = ""
        if source or line:
            where = f"{source or '<config>'}:{line if line else '?'}: "
        super().__init__(where + message)
        self.line = line


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _line_of(text: Optional[str], key: str) -> Optional[int]:
    if not text:
        return None
    needle = f'"{key}"'
    idx = text.find(needle)
    if idx < 0:
        return None
    return text.count("\n", 0, idx) + 1


@dataclass
class CommandSpec:
    text: str
    kind: str = "direct"
    publish_at_ms: float = 0.0
    fill_at_ms: Optional[float] = None
    seeders: int = 0
    file: Optional[str] = None


@dataclass
class SimConfig:
    master_seed: int = 0
    bots: int = 1
    seeders: int = 0
    lookback: int = 0
    attempts: int = 1
    timeout_ms: float = 3000.0
    stagger_ms: float = 0.0
    counters: List[int] = field(default_factory=list)
    commands: List[CommandSpec] = field(default_factory=list)
    domain: CounterDomain = CounterDomain(0, 2**20, 2.0)
    campaign_file: Optional[str] = None
    gateways: Optional[Union[str, list]] = None
    duration_ms: Optional[float] = None
    require_all_reached: bool = True
    experiment: Optional[str] = None
    availability: dict = field(default_factory=dict)
    gateway_matrix: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)
    # anchor index published by each entry of ``commands``
    pub_anchor: List[int] = field(default_factory=list)

    # -- loading -------------------------------------------------------------

    @classmethod
    def from_text(cls, text: str, source: Optional[str] = None, base_dir: Optional[Path] = None) -> "SimConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno, source) from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object", 1, source)
        return cls.from_dict(doc, text=text, source=source, base_dir=base_dir)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SimConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", None, str(path)) from None
        return cls.from_text(text, str(path), path.parent)

    @classmethod
    def from_dict(cls, doc: dict, text: Optional[str] = None, source: Optional[str] = None,
                  base_dir: Optional[Path] = None) -> "SimConfig":
        def fail(key, msg, parent=None):
            line = _line_of(text, key) or (parent and _line_of(text, parent))
            raise ConfigError(f"{key}: {msg}", line, source)

        def num(d, key, default, kind=float, minimum=None, parent=None):
            if key not in d:
                return default
            v = d[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                fail(key, f"expected a number, got {v!r}", parent)
            if kind is int and v != int(v):
                fail(key, f"expected an integer, got {v!r}", parent)
            v = kind(v)
            if minimum is not None and v < minimum:
                fail(key, f"must be >= {minimum}", parent)
            return v

        known = {"master_seed", "bots", "campaign", "gateways", "duration_ms", "experiment",
                 "require_all_reached", "availability", "gateway_matrix", "publications", "timeout_ms"}
        for key in doc:
            if key not in known and not key.startswith("_"):
                fail(key, "unknown key")

        cfg = cls(base_dir=base_dir or Path.cwd())
        cfg.master_seed = num(doc, "master_seed", 0, int)
        cfg.timeout_ms = num(doc, "timeout_ms", 3000.0, float, 1e-9)

        bots = doc.get("bots", {"count": 1})
        if isinstance(bots, int) and not isinstance(bots, bool):
            bots = {"count": bots}
        if not isinstance(bots, dict):
            fail("bots", "expected an object or a count")
        cfg.bots = num(bots, "count", 1, int, 1, "bots")
        cfg.seeders = num(bots, "seeders", 0, int, 0, "bots")
        if cfg.seeders > cfg.bots:
            fail("seeders", "cannot exceed the bot count")
        cfg.lookback = num(bots, "lookback", 0, int, 0, "bots")
        cfg.attempts = num(bots, "attempts", 1, int, 1, "bots")
        cfg.stagger_ms = num(bots, "stagger_ms", 0.0, float, 0, "bots")
        cfg.timeout_ms = num(bots, "timeout_ms", cfg.timeout_ms, float, 1e-9, "bots")

        exp = doc.get("experiment")
        if exp not in EXPERIMENTS:
            fail("experiment", f"expected one of {EXPERIMENTS[1:]} or null")
        cfg.experiment = exp
        cfg.availability = dict(doc.get("availability", {}))
        cfg.gateway_matrix = dict(doc.get("gateway_matrix", {}))
        cfg.require_all_reached = bool(doc.get("require_all_reached", True))

        gws = doc.get("gateways")
        if gws is not None and not isinstance(gws, (str, list)):
            fail("gateways", "expected a path or a list of gateway profiles")
        if isinstance(gws, str):
            gws = str(cfg.base_dir / gws)
        cfg.gateways = gws
        try:
            cfg.profiles()
        except (OSError, KeyError, ValueError, TypeError) as exc:
            fail("gateways", f"cannot load gateway profiles: {exc}")

        camp = doc.get("campaign")
        if camp is None and exp is None:
            fail("campaign", "required unless an experiment is selected")
        if isinstance(camp, str):
            cfg.campaign_file = str(cfg.base_dir / camp)
            try:
                campaign = Campaign.load(cfg.campaign_file)
            except (OSError, KeyError, ValueError) as exc:
                fail("campaign", f"cannot load campaign file: {exc}")
            cfg.domain = campaign.domain
            cfg.counters = [a.counter for a in campaign.anchors]
            pubs = doc.get("publications", [])
            for p in pubs:
                if "file" not in p or "anchor" not in p:
                    fail("publications", "each entry needs 'anchor' and 'file'")
                cfg.commands.append(CommandSpec(
                    text="", file=str(cfg.base_dir / p["file"]),
                    publish_at_ms=float(p.get("publish_at_ms", 0.0)),
                    seeders=int(p.get("seeders", 0)),
                ))
                idx = int(p["anchor"])
                if not 0 <= idx < len(cfg.counters):
                    fail("anchor", f"anchor index {idx} out of range")
            cfg.pub_anchor = [int(p["anchor"]) for p in pubs]
        elif isinstance(camp, dict):
            counters = camp.get("counters")
            commands = camp.get("commands")
            if not isinstance(counters, list) or not counters:
                fail("counters", "expected a non-empty list of counters")
            if not isinstance(commands, list) or len(commands) != len(counters):
                fail("commands", "expected one command per counter")
            if len(set(counters)) != len(counters):
                fail("counters", "counters must be distinct")
            cfg.counters = [int(c) for c in counters]
            for c in commands:
                if isinstance(c, str):
                    c = {"text": c}
                kind = c.get("kind", "direct")
                if kind not in ("direct", "redirect"):
                    fail("kind", f"unknown command kind {kind!r}")
                cfg.commands.append(CommandSpec(
                    text=str(c.get("text", "")),
                    kind=kind,
                    publish_at_ms=num(c, "publish_at_ms", 0.0, float, 0),
                    fill_at_ms=c.get("fill_at_ms"),
                    seeders=num(c, "seeders", 0, int, 0),
                ))
            try:
                cfg.domain = CounterDomain(
                    int(camp.get("start", 0)),
                    int(camp.get("upper", max(cfg.counters) + 1)),
                    float(camp.get("tick_seconds", 2.0)),
                )
            except ValueError as exc:
                fail("campaign", str(exc))
            cfg.pub_anchor = list(range(len(cfg.commands)))
        elif camp is not None:
            fail("campaign", "expected a path or an inline campaign object")
        else:
            cfg.pub_anchor = []

        for spec in cfg.commands:
            if spec.seeders > cfg.seeders:
                fail("seeders", f"a command asks for {spec.seeders} seeders but only {cfg.seeders} bots seed")

        if cfg.counters:
            for c in cfg.counters:
                if c not in cfg.domain:
                    fail("counters", f"counter {c} outside the campaign domain")
            need = cfg.min_duration_ms()
            if "duration_ms" in doc:
                cfg.duration_ms = num(doc, "duration_ms", None, float, 0)
                if cfg.duration_ms < need:
                    fail("duration_ms", f"{cfg.duration_ms:.0f} ms cannot reach counter {max(cfg.counters)}; need >= {need:.0f} ms")
            else:
                cfg.duration_ms = need
        else:
            cfg.duration_ms = num(doc, "duration_ms", 0.0, float, 0)
        return cfg

    def profiles(self) -> List[GatewayProfile]:
        return load_profiles(self.gateways)

    def worst_tick_ms(self) -> float:
        """Longest a single tick's requests can take to come back."""
        polls = 2 if self.lookback else 1
        redirect = 1 if any(c.kind == "redirect" for c in self.commands) else 0
        return (polls + 2 * redirect) * self.attempts * self.timeout_ms

    def min_duration_ms(self) -> float:
        """Simulated time after which every bot's poll of the last anchor has returned."""
        span = max(self.counters) - self.domain.start
        return self.stagger_ms * (self.bots - 1) + span * self.domain.tick_interval * 1000.0 + self.worst_tick_ms()


# -- full campaign run -------------------------------------------------------


class Simulation:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        seed = cfg.master_seed
        self.clock = SimClock()
        self.store = Store()
        self.net = GatewayNet(cfg.profiles(), self.store, substream_seed(seed, "gateways"))
        self.botmaster = Botmaster(self.store, NodeId.from_seed(seed, "botmaster"))
        self.trace: List[dict] = []
        self.publications: List[dict] = []
        self._rendezvous: Dict[int, NodeId] = {}

        envelopes = []
        for i, spec in enumerate(cfg.commands):
            if spec.file:
                envelopes.append(None)
                continue
            if spec.kind == "redirect":
                name = self.botmaster.rendezvous(f"anchor-{i}")
                self._rendezvous[i] = name
                envelopes.append(self.botmaster.sign(Kind.REDIRECT, name.id))
            else:
                envelopes.append(self.botmaster.sign(Kind.DIRECT, spec.text.encode()))

        if cfg.campaign_file:
            self.campaign = Campaign.load(cfg.campaign_file)
            self.botmaster.campaign = self.campaign
            self.blobs = [Path(spec.file).read_bytes() for spec in cfg.commands]
        else:
            self.campaign = self.botmaster.plan(envelopes, cfg.counters, cfg.domain)
            self.blobs = [e.serialize() for e in envelopes]

        self.bots: List[Bot] = []
        for i in range(cfg.bots):
            bc = BotCampaign.from_campaign(
                self.campaign, self.net.gateways,
                timeout_ms=cfg.timeout_ms, attempts=cfg.attempts, lookback=cfg.lookback,
            )
            self.bots.append(Bot(NodeId.from_seed(seed, "bot", i), bc, self.store,
                                 is_seeder=i < cfg.seeders, trace=self.trace))

        # publications are queued first so they win ties against bot ticks
        for i, spec in enumerate(cfg.commands):
            anchor = cfg.pub_anchor[i]
            self.clock.schedule_at(spec.publish_at_ms, self._publisher(i, anchor), f"publish {anchor}")
            if spec.kind == "redirect" and spec.fill_at_ms is not None:
                self.clock.schedule_at(float(spec.fill_at_ms), self._filler(i), f"fill {anchor}")
        for i, bot in enumerate(self.bots):
            bot.start(self.clock, i * cfg.stagger_ms)

    def _publisher(self, i: int, anchor: int):
        spec = self.cfg.commands[i]

        def publish(clock: SimClock) -> None:
            env = CommandEnvelope.parse(self.blobs[i])
            seeders = [b.node for b in self.bots if b.state.is_seeder][: spec.seeders]
            cid = publish_command(self.botmaster, env, anchor, extra_seeders=seeders)
            self.publications.append({"anchor": anchor, "cid": cid.text, "sim_time_ms": clock.now})

        return publish

    def _filler(self, i: int):
        spec = self.cfg.commands[i]

        def fill(clock: SimClock) -> None:
            env = self.botmaster.sign(Kind.DIRECT, spec.text.encode())
            self.botmaster.fill_rendezvous(self._rendezvous[i], env)

        return fill

    def run(self) -> dict:
        self.clock.run_until(self.cfg.duration_ms)
        return self.report()

    def report(self) -> dict:
        cfg = self.cfg
        anchors = list(self.campaign.anchors)
        via_to_anchor = {node.id: cfg.pub_anchor[i] for i, node in self._rendezvous.items()}
        bots_out = []
        pairs_reached = 0
        reached_by = [0] * len(anchors)
        for bot in self.bots:
            hit = set()
            for rec in bot.executed:
                for j, a in enumerate(anchors):
                    if rec.counter == a.counter or via_to_anchor.get(rec.via) == j:
                        hit.add(j)
            for j in hit:
                reached_by[j] += 1
            pairs_reached += len(hit)
            bots_out.append({
                "bot_id": bot.node.hex,
                "seeder": bot.state.is_seeder,
                "final_counter": bot.counter,
                "anchors": {str(a.counter): ("reached" if j in hit else "unreached") for j, a in enumerate(anchors)},
                "executed": [
                    {"counter": r.counter, "command": r.command.decode("utf-8", "replace"),
                     "sim_time_ms": round(r.sim_time_ms, 6),
                     "via": r.via.hex() if r.via else None}
                    for r in bot.executed
                ],
            })
        trusted = [bytes.fromhex(k) for k in self.campaign.trusted_keys]
        safety = check_safety(self.bots, trusted)
        monotone = all(b.counter >= b.state.campaign.domain.start for b in self.bots)
        conservation = all(
            g.profile.requests_total == g.profile.fetched_total + g.profile.dropped_total for g in self.net
        )
        requests = sum(g.profile.requests_total for g in self.net)
        resolved = sum(g.profile.fetched_total for g in self.net)
        swept = sum(b.counter - b.state.campaign.domain.start for b in self.bots)
        executed_total = sum(len(b.executed) for b in self.bots)
        total_pairs = len(self.bots) * len(anchors)
        return {
            "master_seed": cfg.master_seed,
            "duration_ms": cfg.duration_ms,
            "campaign": self.campaign.to_dict(),
            "publications": self.publications,
            "anchors": [
                {"index": j, "counter": a.counter, "cid": a.cid.text, "reached_by": reached_by[j]}
                for j, a in enumerate(anchors)
            ],
            "bots": bots_out,
            "gateways": self.net.stats(),
            "summary": {
                "bots": len(self.bots),
                "pairs_total": total_pairs,
                "pairs_reached": pairs_reached,
                "all_reached": pairs_reached == total_pairs,
                "executions": executed_total,
                "requests": requests,
                "resolved": resolved,
                "counters_swept": swept,
                "stealth_ratio": (resolved / requests) if requests else 0.0,
                "trace_records": len(self.trace),
            },
            "invariants": {
                "safety_violations": safety,
                "counters_monotone": monotone,
                "request_conservation": conservation,
            },
        }

    def trace_jsonl(self) -> str:
        keyed = sorted(enumerate(self.trace), key=lambda p: (p[1]["sim_time_ms"], p[0]))
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for _, rec in keyed)


def run_simulation(cfg: SimConfig) -> Tuple[dict, Simulation]:
    sim = Simulation(cfg)
    return sim.run(), sim


def invariant_problems(report: dict, require_all: bool) -> List[str]:
    inv = report["invariants"]
    problems = list(inv["safety_violations"])
    if not inv["counters_monotone"]:
        problems.append("bot counters went backwards")
    if not inv["request_conservation"]:
        problems.append("gateway requests != fetched + dropped")
    if require_all and not report["summary"]["all_reached"]:
        s = report["summary"]
        problems.append(f"only {s['pairs_reached']} of {s['pairs_total']} (bot, anchor) pairs reached")
    return problems


# -- availability experiment -------------------------------------------------


def summarize(samples: Sequence[float]) -> dict:
    n = len(samples)
    if n == 0:
        return {"n": 0, "mean_ms": None, "std_ms": None, "median_ms": None,
                "q1_ms": None, "q3_ms": None, "min_ms": None, "max_ms": None}
    xs = sorted(samples)
    mean = math.fsum(xs) / n
    std = math.sqrt(math.fsum((x - mean) ** 2 for x in xs) / (n - 1)) if n > 1 else 0.0
    if n > 1:
        q1, med, q3 = statistics.quantiles(xs, n=4, method="inclusive")
    else:
        q1 = med = q3 = xs[0]
    return {"n": n, "mean_ms": mean, "std_ms": std, "median_ms": med,
            "q1_ms": q1, "q3_ms": q3, "min_ms": xs[0], "max_ms": xs[-1]}


def _std_normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _attempt_terms(profile: GatewayProfile, timeout_ms: float) -> Tuple[float, float]:
    """(success probability, mean latency given success) for one attempt."""
    a = profile.availability
    model = profile.model
    if isinstance(model, Lognormal) and model.sigma > 0:
        mu, s = math.log(model.median_ms), model.sigma
        z = (math.log(timeout_ms) - mu) / s
        q = _std_normal_cdf(z)
        if q == 0.0:
            return 0.0, 0.0
        cond = math.exp(mu + s * s / 2) * _std_normal_cdf(z - s) / q
        return a * q, cond
    lat = model.median_ms
    return (a if lat <= timeout_ms else 0.0), lat


def theoretical_availability_mean(profiles: Sequence[GatewayProfile], timeout_ms: float) -> float:
    """Expected publish-to-fetch delay under random failover.

    The first gateway is uniform; after a drop (which costs the full
    timeout) the next is uniform over the others. Solved by fixed-point
    iteration on E_i = q_i m_i + (1 - q_i)(T + mean_{j != i} E_j).
    """
    terms = [_attempt_terms(p, timeout_ms) for p in profiles]
    if all(q == 0 for q, _ in terms):
        return math.inf
    k = len(terms)
    e = [0.0] * k
    for _ in range(100000):
        total = sum(e)
        nxt = []
        for i, (q, m) in enumerate(terms):
            others = (total - e[i]) / (k - 1) if k > 1 else e[i]
            nxt.append(q * m + (1 - q) * (timeout_ms + others))
        if max(abs(x - y) for x, y in zip(nxt, e)) < 1e-9:
            e = nxt
            break
        e = nxt
    return sum(e) / k


def calibrate_lognormal(target_mean_ms: float, sigma: float, timeout_ms: float,
                        count: int = 4, availability: float = 1.0) -> List[GatewayProfile]:
    """``count`` identical lognormal gateways whose pipeline mean is ``target_mean_ms``."""
    def mean_for(median):
        profs = [GatewayProfile(f"https://calibrated-{i}.invalid", Lognormal(median, sigma), availability)
                 for i in range(count)]
        return theoretical_availability_mean(profs, timeout_ms), profs

    lo, hi = 1e-3, timeout_ms * 50
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        m, _ = mean_for(mid)
        if m < target_mean_ms:
            lo = mid
        else:
            hi = mid
    return mean_for(math.sqrt(lo * hi))[1]


def availability_experiment(cfg: SimConfig) -> dict:
    """Publish N small objects at random times; time each until first fetched.

    Fetching uses the fastest ``gateways`` profiles (by median latency) with a
    relaxed timeout, moving to a random other gateway after every drop.
    """
    opts = cfg.availability
    n = int(opts.get("n", 1000))
    size = int(opts.get("object_size", 4096))
    timeout_ms = float(opts.get("timeout_ms", 5000))
    use = int(opts.get("gateways", 4))
    window_ms = float(opts.get("window_ms", max(n, 1) * 10_000.0))
    max_attempts = int(opts.get("max_attempts", 100))
    seed = cfg.master_seed

    clock = SimClock()
    store = Store()
    net = GatewayNet(cfg.profiles(), store, substream_seed(seed, "availability", "gateways"))
    chosen = net.fastest(use)
    publisher = NodeId.from_seed(seed, "availability", "publisher")
    store.register_node(publisher)
    content_rng = substream(seed, "availability", "content")
    time_rng = substream(seed, "availability", "times")
    pick_rng = substream(seed, "availability", "failover")

    samples: List[Optional[float]] = [None] * n
    failures: List[int] = []

    def attempt(i: int, published_at: float, cid, tried: int, last: Optional[int]):
        def go(clk: SimClock) -> None:
            choices = [j for j in range(len(chosen)) if j != last] or list(range(len(chosen)))
            j = choices[pick_rng.randrange(len(choices))]
            res = chosen[j].request(cid, timeout_ms, clk)

            def done(c2: SimClock) -> None:
                if isinstance(res, Fetched):
                    samples[i] = c2.now - published_at
                elif tried + 1 >= max_attempts:
                    failures.append(i)
                else:
                    attempt(i, published_at, cid, tried + 1, j)(c2)

            clk.schedule(res.elapsed_ms, done, f"fetch {i}")

        return go

    def publish(i: int, blob: bytes):
        def go(clk: SimClock) -> None:
            cid = store.put_object(publisher, blob)
            attempt(i, clk.now, cid, 0, None)(clk)

        return go

    for i in range(n):
        blob = content_rng.randbytes(size)
        clock.schedule_at(time_rng.uniform(0, window_ms), publish(i, blob), f"publish {i}")
    while clock.pending():
        clock.run_until(clock.peek())

    got = [s for s in samples if s is not None]
    stats = summarize(got)
    stats["failed"] = len(failures)
    stats["timeout_ms"] = timeout_ms
    stats["gateways"] = [g.name for g in chosen]
    stats["theoretical_mean_ms"] = theoretical_availability_mean([g.profile for g in chosen], timeout_ms)
    return {"experiment": "availability", "master_seed": seed, "stats": stats, "samples_ms": got}


# -- gateway matrix ----------------------------------------------------------


def gateway_matrix_experiment(cfg: SimConfig) -> dict:
    """Fetch each of ``cids`` stored articles ``repeats`` times per gateway, per timeout."""
    opts = cfg.gateway_matrix
    n_cids = int(opts.get("cids", 20))
    repeats = int(opts.get("repeats", 50))
    timeouts = [float(t) for t in opts.get("timeouts_ms", [5000, 3000])]
    rate_s = float(opts.get("rate_limit_s", 2.0))
    seed = cfg.master_seed

    store = Store()
    host = NodeId.from_seed(seed, "matrix", "host")
    store.register_node(host)
    rng = substream(seed, "matrix", "articles")
    cids = [store.put_object(host, rng.randbytes(16 * 1024)).text for _ in range(n_cids)]

    profiles = cfg.profiles()
    reports = {}
    for t in timeouts:
        net = GatewayNet([GatewayProfile.from_dict(p.to_dict()) for p in profiles], store,
                         substream_seed(seed, "matrix", "timeout", t))
        plan = ProbePlan(
            gateways=[g.name for g in net], cids=cids, repeats=repeats,
            rate_limit_s=rate_s, timeout_ms=t,
            max_requests=max(1, repeats * len(cids) * len(profiles)),
            allow_fast=True,
        )
        reports[t] = run_plan(plan, SimTransport(net, VirtualClock()))
    rows = timing_rows(reports) if n_cids and repeats else []
    return {
        "experiment": "gateway_matrix",
        "master_seed": seed,
        "rows": rows,
        "reports": {str(int(t)): r.to_dict() for t, r in reports.items()},
    }
