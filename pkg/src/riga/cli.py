"""``riga`` command line.

Exit codes: 0 success, 1 I/O or runtime failure, 2 bad input or config,
3 an invariant was violated during a simulation run.

The master seed is taken from ``--seed``, else ``RIGA_SEED``, else the config.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .agents import Botmaster, Kind
from .cidcodec import CodecError
from .harness import (
    ConfigError,
    SimConfig,
    Simulation,
    availability_experiment,
    dumps,
    gateway_matrix_experiment,
    invariant_problems,
)
from .keys import NodeId
from .modfield import FieldError
from .probe import PlanError, ProbePlan, default_plan, rows_to_tsv, run_plan
from .rigacore import (
    DEFAULT_TICK_SECONDS,
    DEFAULT_UPPER,
    PRODUCTION_PRIME,
    AnchorSet,
    Campaign,
    CounterDomain,
    RigaError,
    plan_campaign,
)
from .storesim import Store

log = logging.getLogger("riga")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_INVARIANT = 3


class RangeError(ValueError):
    pass


def _counters(values: List[str]) -> List[int]:
    out = []
    for v in values:
        out.extend(int(x) for x in v.replace(",", " ").split())
    return out


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _seed(args, cfg: SimConfig) -> None:
    if args.seed is not None:
        cfg.master_seed = args.seed
    elif os.environ.get("RIGA_SEED"):
        cfg.master_seed = int(os.environ["RIGA_SEED"])


# -- commands ----------------------------------------------------------------


def cmd_plan(args) -> int:
    counters = _counters(args.counters)
    if bool(args.payload) == bool(args.command):
        print("error: give either --payload files or --command texts", file=sys.stderr)
        return EXIT_CONFIG
    domain = CounterDomain(args.start, args.upper, args.tick_seconds)
    try:
        if args.command:
            if not args.envelope_dir:
                print("error: --command needs --envelope-dir for the signed envelopes", file=sys.stderr)
                return EXIT_CONFIG
            master = Botmaster(Store(), NodeId.from_seed("botmaster-key", args.key_seed))
            kind = Kind.REDIRECT if args.redirect else Kind.DIRECT
            if kind is Kind.REDIRECT:
                envs = [master.sign(kind, master.rendezvous(t).id) for t in args.command]
            else:
                envs = [master.sign(kind, t.encode()) for t in args.command]
            campaign = master.plan(envs, counters, domain, args.shuffle_seed, p=args.prime)
            blobs = [e.serialize() for e in envs]
        else:
            blobs = [Path(p).read_bytes() for p in args.payload]
            prng, cids = plan_campaign(blobs, counters, args.prime)
            campaign = Campaign(
                prime=prng.prime,
                anchors=AnchorSet.from_pairs([(c, cid.digest) for c, cid in zip(counters, cids)]),
                domain=domain,
                shuffle_seed=args.shuffle_seed,
            )
    except (RigaError, FieldError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL

    if args.command:
        out_dir = Path(args.envelope_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for i, blob in enumerate(blobs):
            (out_dir / f"anchor-{i}.env").write_bytes(blob)
    _write(args.out, campaign.to_json())
    for i, a in enumerate(campaign.anchors):
        print(f"{i}\t{a.counter}\t{a.cid.text}", file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        campaign = Campaign.load(args.campaign)
    except (OSError, KeyError, ValueError) as exc:
        print(f"error: cannot load campaign: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    dom = campaign.domain
    lo = dom.start if args.from_ is None else args.from_
    hi = lo if args.to is None else args.to
    try:
        if lo > hi or lo not in dom or hi not in dom:
            raise RangeError(f"range [{lo}, {hi}] not inside domain [{dom.start}, {dom.upper}]")
    except RangeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = sys.stdout
    if args.names:
        riga = campaign.name_riga()
        order = riga.visit_order[lo - dom.start : hi - dom.start + 1]
        for counter in order:
            out.write(f"{counter}\t{riga.name_at(counter).text}\n")
    else:
        prng = campaign.prng()
        for counter in range(lo, hi + 1):
            out.write(f"{counter}\t{prng.uri_at(counter).text}\n")
    return EXIT_OK


def _load_config(args) -> SimConfig:
    cfg = SimConfig.load(args.config)
    _seed(args, cfg)
    return cfg


def cmd_sim(args) -> int:
    try:
        cfg = _load_config(args)
        sim = Simulation(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = sim.run()
    _write(args.out, dumps(report))
    if args.trace:
        Path(args.trace).write_text(sim.trace_jsonl())
    if args.dump:
        Path(args.dump).write_text(dumps(sim.store.snapshot(args.view)))
    s = report["summary"]
    print(
        f"bots={s['bots']} reached={s['pairs_reached']}/{s['pairs_total']} "
        f"requests={s['requests']} resolved={s['resolved']}",
        file=sys.stderr,
    )
    problems = invariant_problems(report, cfg.require_all_reached)
    for p in problems:
        print(f"invariant: {p}", file=sys.stderr)
    return EXIT_INVARIANT if problems else EXIT_OK


def cmd_dump(args) -> int:
    try:
        cfg = _load_config(args)
        sim = Simulation(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    sim.run()
    _write(args.out, dumps(sim.store.snapshot(args.view)))
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.kind == "availability":
        result = availability_experiment(cfg)
        st = result["stats"]
        table = (
            "n\tmean_ms\tstd_ms\tmedian_ms\tq1_ms\tq3_ms\tfailed\n"
            + "\t".join(
                "" if st[k] is None else (f"{st[k]:.3f}" if isinstance(st[k], float) else str(st[k]))
                for k in ("n", "mean_ms", "std_ms", "median_ms", "q1_ms", "q3_ms", "failed")
            )
            + "\n"
        )
        if args.samples:
            Path(args.samples).write_text("".join(f"{x!r}\n" for x in result["samples_ms"]))
    else:
        result = gateway_matrix_experiment(cfg)
        table = rows_to_tsv(result["rows"])
    _write(args.out, dumps(result))
    if args.table:
        Path(args.table).write_text(table)
    else:
        sys.stderr.write(table)
    return EXIT_OK


def cmd_probe(args) -> int:
    overrides = {"timeout_ms": args.timeout_ms, "rate_limit_s": args.rate_s}
    if args.allow_fast:
        overrides["allow_fast"] = True
    try:
        if args.plan:
            plan = ProbePlan.load(args.plan, **overrides)
        else:
            plan = ProbePlan.from_dict(default_plan().to_dict(), **overrides)
    except (PlanError, CodecError, OSError, ValueError) as exc:
        print(f"plan error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("probing %d gateways, %d requests", len(plan.gateways), plan.request_count)
    report = run_plan(plan)
    _write(args.out, report.to_json())
    return EXIT_OK if report.complete else EXIT_FAIL


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="riga", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("plan", help="anchor payloads at counters and write a campaign file")
    p.add_argument("--payload", action="append", default=[], help="payload file (repeatable)")
    p.add_argument("--command", action="append", default=[], help="command text to sign (repeatable)")
    p.add_argument("--redirect", action="store_true", help="anchor redirect envelopes to fresh rendezvous names")
    p.add_argument("--counters", action="append", required=True, help="comma-separated counters")
    p.add_argument("--out", default="-")
    p.add_argument("--envelope-dir")
    p.add_argument("--key-seed", type=int, default=0)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--upper", type=int, default=DEFAULT_UPPER)
    p.add_argument("--tick-seconds", type=float, default=DEFAULT_TICK_SECONDS)
    p.add_argument("--shuffle-seed", type=int, default=0)
    p.add_argument("--prime", type=int, default=PRODUCTION_PRIME)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("gen", help="print counter<TAB>cid lines for a counter range")
    p.add_argument("--campaign", required=True)
    p.add_argument("--from", dest="from_", type=int)
    p.add_argument("--to", type=int)
    p.add_argument("--names", action="store_true", help="walk the seeded visit order of the name variant")
    p.set_defaults(func=cmd_gen)

    def sim_args(p):
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", default="-")

    p = sub.add_parser("sim", help="run a full campaign simulation")
    sim_args(p)
    p.add_argument("--trace", help="write the poll trace as JSON lines")
    p.add_argument("--dump", help="also write a store snapshot")
    p.add_argument("--view", choices=("full", "analyst"), default="analyst")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("dump", help="run a simulation and write the store snapshot")
    sim_args(p)
    p.add_argument("--view", choices=("full", "analyst"), default="analyst")
    p.set_defaults(func=cmd_dump)

    p = sub.add_parser("experiment", help="replay a measurement experiment in simulation")
    p.add_argument("kind", choices=("availability", "gateway_matrix"))
    sim_args(p)
    p.add_argument("--samples", help="availability: one raw sample per line")
    p.add_argument("--table", help="TSV summary table")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("probe", help="time live gateways")
    psub = p.add_subparsers(dest="probe_cmd", required=True)
    r = psub.add_parser("run")
    r.add_argument("--plan")
    r.add_argument("--out", default="-")
    r.add_argument("--timeout-ms", type=float)
    r.add_argument("--rate-s", type=float)
    r.add_argument("--allow-fast", action="store_true", help="permit rate limits under 1 s")
    r.set_defaults(func=cmd_probe)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
