"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""
import json
import math
import random
import time
from collections import Counter

import pytest

from oracles import lagrange_sum
from riga.agents import Botmaster, collect_feedback, push_feedback
from riga.cidcodec import base58_decode, base58_encode, cid_from_value, cid_to_value
from riga.cli import main as cli_main
from riga.gatewaysim import Fixed, GatewayNet, GatewayProfile, RoundRobinState, SimClock, next_gateway
from riga.harness import (
    SimConfig,
    Simulation,
    availability_experiment,
    calibrate_lognormal,
    dumps,
    invariant_problems,
    theoretical_availability_mean,
)
from riga.keys import NodeId
from riga.modfield import is_probable_prime, lagrange_interpolate, poly_eval
from riga.probe import ProbePlan, SimTransport, run_plan
from riga.rigacore import PRODUCTION_PRIME, AnchorSet, build_skewed_prng, uri_at
from riga.storesim import NotFound, Store


@pytest.fixture
def verdict(capsys, request):
    """Call with (ok, detail); prints one line and fails the test when not ok."""
    label = request.node.name

    def _verdict(ok, detail=""):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {label}: {detail}")
        assert ok, detail

    return _verdict


def test_ac01_anchor_exactness(verdict):
    rng = random.Random(20190601)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(100):
        k = rng.randint(1, 16)
        counters = rng.sample(range(2**20 + 1), k)
        digests = [rng.randbytes(32) for _ in range(k)]
        prng = build_skewed_prng(AnchorSet.from_pairs(list(zip(counters, digests))), PRODUCTION_PRIME)
        bad += sum(uri_at(prng, c).digest != h for c, h in zip(counters, digests))
    elapsed = time.perf_counter() - t0
    verdict(bad == 0 and elapsed < 5.0, f"mismatches={bad}, {elapsed:.2f}s (limit 5s)")


def test_ac02_small_field_oracle(verdict):
    rng = random.Random(97)
    t0 = time.perf_counter()
    bad = checked = 0
    for k in range(1, 5):
        for _ in range(5):
            xs = rng.sample(range(97), k)
            pts = [(x, rng.randrange(97)) for x in xs]
            poly = lagrange_interpolate(pts, 97)
            for x in range(97):
                checked += 1
                bad += poly_eval(poly, x) != lagrange_sum(pts, 97, x)
    elapsed = time.perf_counter() - t0
    verdict(bad == 0 and elapsed < 1.0, f"{checked} evaluations, mismatches={bad}, {elapsed:.3f}s (limit 1s)")


def test_ac03_codec_vectors(verdict):
    text = "Qmc8N5wtMkvMySqxu4Agy2SGvL2zxYGf4rWmHvMASoUQv6"
    mh = base58_decode(text)
    vector_ok = len(mh) == 34 and mh[:2] == b"\x12\x20" and base58_encode(mh) == text
    vector_ok &= cid_from_value(cid_to_value(text)).text == text
    rng = random.Random(3)
    failures = 0
    for _ in range(10_000):
        v = rng.getrandbits(256)
        blob = rng.randbytes(rng.randrange(65))
        failures += cid_to_value(cid_from_value(v)) != v
        failures += base58_decode(base58_encode(blob)) != blob
    verdict(vector_ok and failures == 0, f"listing vector ok={vector_ok}, round-trip failures={failures}/20000")


def test_ac04_production_prime(verdict):
    ok = PRODUCTION_PRIME == 2**256 + 297 and is_probable_prime(PRODUCTION_PRIME, rounds=64)
    verdict(ok, "2^256+297 passes 64 Miller-Rabin rounds" if ok else "primality check failed")


ACCEPTANCE_SIM = {
    "master_seed": 2019,
    "bots": {"count": 20, "attempts": 2},
    "timeout_ms": 3000,
    "campaign": {
        "counters": [100, 250],
        "commands": ["update", "report"],
        "upper": 260,
        "tick_seconds": 2,
    },
}


def test_ac05_end_to_end_campaign(verdict):
    t0 = time.perf_counter()
    runs = []
    for _ in range(2):
        sim = Simulation(SimConfig.from_dict(json.loads(json.dumps(ACCEPTANCE_SIM))))
        report = sim.run()
        runs.append((dumps(report), sim.trace_jsonl(), report, sim))
    elapsed = time.perf_counter() - t0
    report, sim = runs[0][2], runs[0][3]
    identical = runs[0][0] == runs[1][0] and runs[0][1] == runs[1][1]
    executed_both = all(
        sorted({r.counter for r in b.executed}) == [100, 250]
        and sorted(r.command for r in b.executed) == [b"report", b"update"]
        for b in sim.bots
    )
    problems = invariant_problems(report, True)
    ok = (len(sim.net) == 13 and report["summary"]["pairs_reached"] == 40 and executed_both
          and not problems and identical and elapsed < 10.0)
    verdict(ok, f"pairs={report['summary']['pairs_reached']}/40, safety={not problems}, "
                f"identical={identical}, {elapsed:.2f}s for two runs (limit 10s)")


def test_ac06_round_robin_fairness(verdict):
    rr = RoundRobinState([f"g{i}" for i in range(13)])
    counts = Counter(next_gateway(rr) for _ in range(1000))
    ok = len(counts) == 13 and set(counts.values()) <= {76, 77}
    verdict(ok, f"counts={sorted(counts.values())}")


def test_ac07_timeout_accounting(verdict):
    store = Store()
    host = NodeId.from_seed("ac07")
    store.register_node(host)
    cids = [store.put_object(host, f"article {i}".encode()).text for i in range(10)]
    net = GatewayNet([GatewayProfile("slow", Fixed(6000)), GatewayProfile("fast", Fixed(100))], store, 0)
    report = run_plan(ProbePlan(["slow", "fast"], cids, repeats=5, timeout_ms=3000), SimTransport(net))
    slow, fast = report.gateways["slow"], report.gateways["fast"]
    ok = (slow.dropped_count == slow.requests == 50 and fast.dropped_count == 0 and fast.requests == 50)
    verdict(ok, f"slow dropped {slow.dropped_count}/{slow.requests}, fast dropped {fast.dropped_count}/{fast.requests}")


def test_ac08_availability_self_consistency(verdict):
    target = 3647.0
    profiles = calibrate_lognormal(target, sigma=1.0, timeout_ms=5000, count=4)
    theory = theoretical_availability_mean(profiles, 5000)
    cfg = SimConfig.from_dict({
        "master_seed": 2019,
        "experiment": "availability",
        "gateways": [p.to_dict() for p in profiles],
        "availability": {"n": 1000, "object_size": 4096, "timeout_ms": 5000, "gateways": 4},
    })
    result = availability_experiment(cfg)
    samples = result["samples_ms"]
    reported = result["stats"]["mean_ms"]
    recomputed = math.fsum(samples) / len(samples)
    rel_err = abs(recomputed - reported) / reported
    within = abs(reported - target) / target
    ok = (abs(theory - target) < 1e-6 and len(samples) == 1000 and within <= 0.10 and rel_err <= 1e-9)
    verdict(ok, f"theory={theory:.3f}ms, sample mean={reported:.1f}ms ({within:.1%} off, limit 10%), "
                f"n={len(samples)}, recompute rel err={rel_err:.1e}")


def test_ac09_trace_removal(verdict):
    store = Store()
    master = Botmaster(store, NodeId.from_seed("ac09", "master"))
    bot_node = NodeId.from_seed("ac09", "bot")
    store.register_node(bot_node)
    bot = type("FeedbackBot", (), {"node": bot_node, "store": store})()
    board = master.open_board()
    cid = push_feedback(bot, b"victim=10.0.0.7", board, unpin_after=True)
    got = collect_feedback(master, board)
    net = GatewayNet([GatewayProfile("analyst-gw", Fixed(50))], store, 0)
    via_gateway = net["analyst-gw"].request(cid, 3000, SimClock())
    try:
        store.get_object(cid)
        direct = "fetched"
    except NotFound:
        direct = "NotFound"
    ok = got == [b"victim=10.0.0.7"] and direct == "NotFound" and not via_gateway.ok
    verdict(ok, f"collected={got!r}, third-party get={direct}, gateway ok={via_gateway.ok}")


@pytest.mark.live
def test_ac10_live_probe(verdict, tmp_path):
    out = tmp_path / "report.json"
    code = cli_main(["probe", "run", "--out", str(out), "--timeout-ms", "10000"])
    report = json.loads(out.read_text())
    stamps = sorted(t for g in report["gateways"].values() for t in g["timestamps_ms"])
    gaps = [b - a for a, b in zip(stamps, stamps[1:])]
    shaped = all({"requests", "total_time_ms", "dropped_count", "latencies_ms"} <= set(g)
                 for g in report["gateways"].values())
    ok = (code == 0 and report["complete"] and len(report["gateways"]) >= 2
          and all(g >= 2000.0 for g in gaps) and shaped)
    fetched = sum(g["requests"] - g["dropped_count"] for g in report["gateways"].values())
    verdict(ok, f"exit={code}, gateways={len(report['gateways'])}, fetched={fetched}, "
                f"min gap={min(gaps) if gaps else None}ms")
