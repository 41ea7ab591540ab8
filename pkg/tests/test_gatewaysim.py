import math
import random
import statistics
from collections import Counter

import pytest

from riga.cidcodec import cid_of_content, cid_from_value
from riga.gatewaysim import (
    Dropped,
    EmptyGatewayList,
    Fetched,
    Fixed,
    Gateway,
    GatewayNet,
    GatewayProfile,
    Lognormal,
    RoundRobinState,
    SimClock,
    default_profiles,
    load_profiles,
    next_gateway,
    request,
    run_until,
)
from riga.keys import NodeId
from riga.rng import substream
from riga.storesim import Store


def _store_with(blob=b"content"):
    store = Store()
    up = NodeId.from_seed("gw-test")
    store.register_node(up)
    return store, store.put_object(up, blob)


def _gw(model, store, availability=1.0, **kw):
    return Gateway(GatewayProfile("https://gw.test", model, availability, **kw), store, random.Random(0))


def test_slow_fixed_gateway_drops_at_timeout():
    store, cid = _store_with()
    res = request(_gw(Fixed(5000), store), cid, 3000, SimClock())
    assert isinstance(res, Dropped)
    assert res.elapsed_ms == 3000.0


def test_fast_fixed_gateway_fetches():
    store, cid = _store_with(b"abc")
    gw = _gw(Fixed(100), store)
    res = request(gw, cid, 3000, SimClock())
    assert isinstance(res, Fetched)
    assert res.latency_ms == 100.0 and res.data == b"abc"
    assert gw.profile.stats() == {"requests_total": 1, "fetched_total": 1, "dropped_total": 0}


def test_unresolvable_cid_costs_full_timeout():
    store, _ = _store_with()
    gw = _gw(Fixed(100), store)
    res = gw.request(cid_from_value(12345), 3000, SimClock())
    assert isinstance(res, Dropped) and res.elapsed_ms == 3000.0
    assert gw.profile.dropped_total == 1


def test_availability_zero_always_drops():
    store, cid = _store_with()
    gw = _gw(Fixed(10), store, availability=0.0)
    for _ in range(20):
        assert isinstance(gw.request(cid, 1000, SimClock()), Dropped)


def test_timeout_must_be_positive():
    store, cid = _store_with()
    with pytest.raises(ValueError):
        _gw(Fixed(10), store).request(cid, 0, SimClock())


def test_profile_validation():
    with pytest.raises(ValueError):
        Lognormal(0, 0.5)
    with pytest.raises(ValueError):
        GatewayProfile("x", Fixed(1), availability=1.5)


def test_round_robin_sequence():
    rr = RoundRobinState(["g0", "g1", "g2"])
    assert [next_gateway(rr) for _ in range(7)] == ["g0", "g1", "g2", "g0", "g1", "g2", "g0"]
    with pytest.raises(EmptyGatewayList):
        RoundRobinState([])


def test_round_robin_fairness_13():
    rr = RoundRobinState(range(13))
    counts = Counter(next_gateway(rr) for _ in range(1000))
    assert set(counts.values()) <= {76, 77}
    assert sum(counts.values()) == 1000


def test_clock_basics():
    clock = SimClock()
    assert run_until(clock, 50) == []
    assert clock.now == 50
    order = []
    clock.schedule_at(60, lambda c: order.append("a"))
    clock.schedule_at(60, lambda c: order.append("b"))
    clock.schedule_at(55, lambda c: order.append("first"))
    fired = clock.run_until(100)
    assert order == ["first", "a", "b"]
    assert [e.time_ms for e in fired] == [55, 60, 60]
    assert clock.now == 100
    with pytest.raises(ValueError):
        clock.run_until(10)
    with pytest.raises(ValueError):
        clock.schedule_at(5)


def test_clock_events_can_schedule_more():
    clock = SimClock()
    seen = []

    def tick(c):
        seen.append(c.now)
        if c.now < 40:
            c.schedule(10, tick)

    clock.schedule_at(0, tick)
    clock.run_until(100)
    assert seen == [0, 10, 20, 30, 40]


def _trace(seed):
    store, cid = _store_with()
    net = GatewayNet(default_profiles(), store, seed)
    clock = SimClock()
    out = []
    rr = RoundRobinState(net.gateways)
    for _ in range(200):
        res = next_gateway(rr).request(cid, 3000, clock)
        out.append((res.gateway, res.ok, round(res.elapsed_ms, 9)))
    return out


def test_same_seed_same_trace():
    assert _trace(42) == _trace(42)
    assert _trace(42) != _trace(43)


def test_substreams_independent_of_other_gateways():
    store, cid = _store_with()
    profs = default_profiles()
    full = GatewayNet(profs, store, 7)
    fewer = GatewayNet([GatewayProfile.from_dict(p.to_dict()) for p in profs[3:]], store, 7)
    name = profs[5].name
    a = [full[name].request(cid, 5000, SimClock()).elapsed_ms for _ in range(20)]
    b = [fewer[name].request(cid, 5000, SimClock()).elapsed_ms for _ in range(20)]
    assert a == b


def test_lognormal_sampler_median():
    rng = substream(0, "sampler")
    model = Lognormal(300, 0.6)
    xs = [model.sample(rng) for _ in range(10_000)]
    assert abs(statistics.median(xs) - 300) / 300 < 0.10
    assert model.mean_ms == pytest.approx(300 * math.exp(0.18))


def test_default_profiles_shape():
    profs = default_profiles()
    assert len(profs) == 13
    assert profs[0].name == "https://ipfs.io"
    assert all(isinstance(p.model, Lognormal) for p in profs)
    assert all(p.min_interval_ms is None for p in profs)


def test_load_profiles_plain_list(tmp_path):
    doc = [{"name": "a", "model": {"type": "fixed", "ms": 5}, "availability": 0.5},
           {"name": "b", "model": {"type": "lognormal", "median_ms": 10, "sigma": 0.1}}]
    profs = load_profiles(doc)
    assert profs[0].model == Fixed(5) and profs[0].availability == 0.5
    assert profs[1].availability == 1.0
    with pytest.raises(ValueError):
        load_profiles(doc + doc)
    with pytest.raises(ValueError):
        load_profiles([{"name": "c", "model": {"type": "pareto"}}])


def test_default_profiles_never_throttle_at_one_per_two_seconds():
    store, cid = _store_with()
    net = GatewayNet(default_profiles(), store, 1)
    clock = SimClock()
    client = b"bot"
    for i in range(100):
        clock.run_until(i * 2000.0)
        for gw in net:
            res = gw.request(cid, 10**9, clock, client=client)
            assert getattr(res, "reason", None) != "throttled"


def test_optional_rate_limiter():
    store, cid = _store_with()
    gw = _gw(Fixed(10), store, min_interval_ms=1000)
    clock = SimClock()
    assert gw.request(cid, 3000, clock, client="c").ok
    clock.run_until(500)
    res = gw.request(cid, 3000, clock, client="c")
    assert isinstance(res, Dropped) and res.reason == "throttled"
    # another client is unaffected
    assert gw.request(cid, 3000, clock, client="d").ok


def test_conservation_under_mixed_outcomes():
    store, cid = _store_with()
    profs = [GatewayProfile("a", Lognormal(2500, 0.8), 0.7), GatewayProfile("b", Fixed(100), 0.9)]
    net = GatewayNet(profs, store, 3)
    clock = SimClock()
    for i in range(500):
        target = cid if i % 3 else cid_of_content(b"missing")
        net.gateways[i % 2].request(target, 3000, clock)
    for g in net:
        p = g.profile
        assert p.requests_total == p.fetched_total + p.dropped_total
        assert p.dropped_total <= p.requests_total
