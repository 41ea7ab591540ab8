import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from riga.cidcodec import CodecError, cid_from_value
from riga.gatewaysim import Fixed, GatewayNet, GatewayProfile
from riga.keys import NodeId
from riga.probe import (
    HttpTransport,
    PlanError,
    ProbePlan,
    SimTransport,
    VirtualClock,
    default_plan,
    probe_once,
    rows_to_tsv,
    run_plan,
    timing_rows,
)
from riga.storesim import Store

KNOWN = "QmQPeNsJPyVWPFDVHb77w8G42Fvo15z4bG2X8D2GhfbSXc"


class _Handler(BaseHTTPRequestHandler):
    def do_GET(self):
        if self.path == f"/ipfs/{KNOWN}":
            body = b"article"
            self.send_response(200)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)
        else:
            self.send_response(404)
            self.send_header("Content-Length", "0")
            self.end_headers()

    def log_message(self, *args):
        pass


@pytest.fixture(scope="module")
def local_gateway():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


def test_probe_once_http_success(local_gateway):
    out = probe_once(local_gateway, KNOWN, 3000)
    assert not out.dropped and 0 < out.latency_ms < 3000


def test_probe_once_http_missing_counts_as_timeout(local_gateway):
    out = probe_once(local_gateway, cid_from_value(7).text, 1500)
    assert out.dropped and out.latency_ms == 1500


def test_probe_once_unreachable_host():
    out = probe_once("http://127.0.0.1:9", KNOWN, 500)
    assert out.dropped and out.latency_ms == 500


def test_malformed_cid_rejected_before_network():
    class Boom:
        clock = None

        def fetch(self, *a):
            raise AssertionError("network touched")

    with pytest.raises(CodecError):
        probe_once("https://ipfs.io", "Qm0notacid", 1000, Boom())


def test_plan_guardrails():
    with pytest.raises(PlanError):
        ProbePlan(["https://a"], [KNOWN], rate_limit_s=0.5)
    ProbePlan(["https://a"], [KNOWN], rate_limit_s=0.5, allow_fast=True)
    with pytest.raises(PlanError):
        ProbePlan(["https://a"], [KNOWN] * 2001)
    with pytest.raises(PlanError):
        ProbePlan(["https://a"], ["not-a-cid"])
    with pytest.raises(PlanError):
        run_plan(ProbePlan(["ftp://a"], [KNOWN]))


def test_default_plan_is_polite():
    plan = default_plan()
    assert plan.rate_limit_s >= 2.0
    assert len(plan.gateways) >= 2
    assert all(g.startswith("https://") for g in plan.gateways)
    assert plan.request_count <= plan.max_requests


def test_empty_plan():
    report = run_plan(ProbePlan(["https://a"], []), SimTransport(GatewayNet([], Store())))
    assert report.gateways == {} and report.complete


def _sim(latency=100.0, n=20, gateways=1, seed=0):
    store = Store()
    host = NodeId.from_seed("probe-host")
    store.register_node(host)
    cids = [store.put_object(host, f"doc {i}".encode()).text for i in range(n)]
    net = GatewayNet([GatewayProfile(f"gw{i}", Fixed(latency)) for i in range(gateways)], store, seed)
    return net, cids


def test_shim_twenty_requests():
    net, cids = _sim()
    plan = ProbePlan(["gw0"], cids, timeout_ms=3000)
    report = run_plan(plan, SimTransport(net))
    st = report.gateways["gw0"]
    assert st.requests == 20
    assert st.total_time_ms == pytest.approx(2000.0, abs=1e-6)
    assert st.dropped_count == 0
    assert report.min_gap_ms() >= 2000.0


def test_shim_runs_are_identical():
    def once():
        net, cids = _sim(gateways=2)
        return run_plan(ProbePlan(["gw0", "gw1"], cids[:5], repeats=3), SimTransport(net)).to_json()

    assert once() == once()


def test_dropped_latency_equals_timeout_and_gap_holds():
    net, cids = _sim(latency=6000.0, n=4)
    report = run_plan(ProbePlan(["gw0"], cids, timeout_ms=3000, rate_limit_s=2.0), SimTransport(net))
    st = report.gateways["gw0"]
    assert st.dropped_count == 4
    assert st.latencies_ms == [3000.0] * 4
    stamps = st.timestamps_ms
    assert all(b - a >= 2000.0 for a, b in zip(stamps, stamps[1:]))


def test_report_schema_matches_between_http_and_shim(local_gateway):
    http = run_plan(ProbePlan([local_gateway], [KNOWN], rate_limit_s=1.0))
    net, cids = _sim(n=1)
    sim = run_plan(ProbePlan(["gw0"], cids, rate_limit_s=1.0), SimTransport(net, VirtualClock()))
    h, s = http.to_dict(), sim.to_dict()
    assert set(h) == set(s)
    assert set(next(iter(h["gateways"].values()))) == set(next(iter(s["gateways"].values())))
    json.dumps(h)


def test_interrupt_gives_partial_report():
    class Flaky:
        def __init__(self, inner):
            self.inner, self.clock, self.calls = inner, inner.clock, 0

        def fetch(self, *a):
            self.calls += 1
            if self.calls == 3:
                raise KeyboardInterrupt
            return self.inner.fetch(*a)

    net, cids = _sim(n=5)
    report = run_plan(ProbePlan(["gw0"], cids), Flaky(SimTransport(net)))
    assert not report.complete
    assert report.gateways["gw0"].requests == 2


def test_timing_rows():
    reports = {}
    for t in (5000.0, 3000.0):
        net, cids = _sim(latency=4000.0, n=3)
        reports[t] = run_plan(ProbePlan(["gw0"], cids, timeout_ms=t), SimTransport(net))
    rows = timing_rows(reports)
    assert rows == [{
        "gateway": "gw0",
        "requests@5000ms": 3, "total_time_ms@5000ms": 12000.0, "dropped@5000ms": 0,
        "requests@3000ms": 3, "total_time_ms@3000ms": 9000.0, "dropped@3000ms": 3,
    }]
    tsv = rows_to_tsv(rows)
    assert tsv.splitlines()[0].startswith("gateway\trequests@5000ms")


@pytest.mark.live
def test_live_probe_default_plan():
    plan = ProbePlan.from_dict(default_plan().to_dict(), timeout_ms=10000)
    report = run_plan(plan, HttpTransport())
    assert report.complete
    assert report.min_gap_ms() is None or report.min_gap_ms() >= 2000.0
    assert sum(s.requests - s.dropped_count for s in report.gateways.values()) >= 1
