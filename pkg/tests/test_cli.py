import json

import pytest

from oracles import cid_text_of_bytes
from riga.cli import main
from riga.rigacore import Campaign

FAST = [{"name": f"g{i}", "model": {"type": "fixed", "ms": 100}} for i in range(2)]


@pytest.fixture
def payloads(tmp_path):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    a.write_bytes(b"noop")
    b.write_bytes(b"second payload")
    return a, b


def test_version(capsys):
    with pytest.raises(SystemExit) as err:
        main(["--version"])
    assert err.value.code == 0
    assert "riga" in capsys.readouterr().out


def test_plan_is_deterministic(tmp_path, payloads, capsys):
    out1, out2 = tmp_path / "c1.json", tmp_path / "c2.json"
    args = ["plan", "--payload", str(payloads[0]), "--payload", str(payloads[1]), "--counters", "100,250"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    camp = Campaign.load(out1)
    assert [a.counter for a in camp.anchors] == [100, 250]
    assert camp.anchors.anchors[0].cid.text == cid_text_of_bytes(b"noop")
    printed = capsys.readouterr().out
    assert cid_text_of_bytes(b"noop") in printed


def test_plan_duplicate_counters(tmp_path, payloads):
    out = tmp_path / "c.json"
    code = main(["plan", "--payload", str(payloads[0]), "--payload", str(payloads[1]),
                 "--counters", "7,7", "--out", str(out)])
    assert code != 0
    assert not out.exists()


def test_plan_missing_file(tmp_path):
    assert main(["plan", "--payload", str(tmp_path / "nope"), "--counters", "1"]) == 1


def test_plan_signed_commands(tmp_path):
    out, envs = tmp_path / "c.json", tmp_path / "envs"
    assert main(["plan", "--command", "update", "--command", "sleep", "--counters", "3,6",
                 "--upper", "10", "--envelope-dir", str(envs), "--out", str(out)]) == 0
    camp = Campaign.load(out)
    assert len(camp.trusted_keys) == 1
    blob = (envs / "anchor-0.env").read_bytes()
    assert camp.anchors.anchors[0].cid.text == cid_text_of_bytes(blob)


def _campaign(tmp_path, payloads, counters="3,6", upper="10"):
    out = tmp_path / "camp.json"
    args = ["plan", "--counters", counters, "--upper", upper, "--out", str(out)]
    for p in payloads:
        args += ["--payload", str(p)]
    assert main(args) == 0
    return out


def test_gen_prints_anchor(tmp_path, payloads, capsys):
    camp = _campaign(tmp_path, payloads)
    capsys.readouterr()
    assert main(["gen", "--campaign", str(camp), "--from", "0", "--to", "10"]) == 0
    first = capsys.readouterr().out
    lines = [l.split("\t") for l in first.splitlines()]
    assert [int(c) for c, _ in lines] == list(range(11))
    assert lines[3][1] == cid_text_of_bytes(b"noop")
    assert main(["gen", "--campaign", str(camp), "--from", "0", "--to", "10"]) == 0
    assert capsys.readouterr().out == first


def test_gen_single_anchor_constant(tmp_path, payloads, capsys):
    camp = _campaign(tmp_path, payloads[:1], counters="2")
    capsys.readouterr()
    main(["gen", "--campaign", str(camp), "--from", "0", "--to", "5"])
    cids = {l.split("\t")[1] for l in capsys.readouterr().out.splitlines()}
    assert cids == {cid_text_of_bytes(b"noop")}


def test_gen_range_error(tmp_path, payloads):
    camp = _campaign(tmp_path, payloads)
    assert main(["gen", "--campaign", str(camp), "--from", "5", "--to", "11"]) == 2
    assert main(["gen", "--campaign", str(camp), "--from", "5", "--to", "4"]) == 2


def test_gen_names_walk_permutation(tmp_path, payloads, capsys):
    camp = _campaign(tmp_path, payloads)
    capsys.readouterr()
    main(["gen", "--campaign", str(camp), "--from", "0", "--to", "10", "--names"])
    counters = [int(l.split("\t")[0]) for l in capsys.readouterr().out.splitlines()]
    assert sorted(counters) == list(range(11))


def _sim_config(tmp_path, **over):
    doc = {"master_seed": 5, "bots": 3, "gateways": FAST,
           "campaign": {"counters": [4, 9], "commands": ["a", "b"], "upper": 12}}
    doc.update(over)
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(doc, indent=2))
    return path


def test_sim_outputs(tmp_path):
    cfg = _sim_config(tmp_path)
    r1, r2, trace, dump = (tmp_path / n for n in ("r1.json", "r2.json", "t.jsonl", "d.json"))
    assert main(["sim", "--config", str(cfg), "--out", str(r1), "--trace", str(trace), "--dump", str(dump)]) == 0
    assert main(["sim", "--config", str(cfg), "--out", str(r2)]) == 0
    assert r1.read_bytes() == r2.read_bytes()
    report = json.loads(r1.read_text())
    assert report["summary"]["all_reached"]
    recs = [json.loads(l) for l in trace.read_text().splitlines()]
    assert len(recs) == report["summary"]["trace_records"]
    assert "nodes" not in json.loads(dump.read_text())


def test_seed_precedence(tmp_path, monkeypatch):
    cfg = _sim_config(tmp_path)
    out = tmp_path / "r.json"
    monkeypatch.setenv("RIGA_SEED", "77")
    main(["sim", "--config", str(cfg), "--out", str(out)])
    assert json.loads(out.read_text())["master_seed"] == 77
    main(["sim", "--config", str(cfg), "--out", str(out), "--seed", "8"])
    assert json.loads(out.read_text())["master_seed"] == 8
    monkeypatch.delenv("RIGA_SEED")
    main(["sim", "--config", str(cfg), "--out", str(out)])
    assert json.loads(out.read_text())["master_seed"] == 5


def test_sim_config_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "bots": 1,\n  "oops": true\n}\n')
    assert main(["sim", "--config", str(path)]) == 2
    assert f"{path}:3:" in capsys.readouterr().err


def test_sim_invariant_exit_code(tmp_path):
    cfg = _sim_config(tmp_path, campaign={
        "counters": [4, 9], "commands": [{"text": "a", "publish_at_ms": 9000}, "b"], "upper": 12})
    assert main(["sim", "--config", str(cfg), "--out", str(tmp_path / "r.json")]) == 3


def test_dump_full_view(tmp_path):
    cfg = _sim_config(tmp_path)
    out = tmp_path / "d.json"
    assert main(["dump", "--config", str(cfg), "--out", str(out), "--view", "full"]) == 0
    snap = json.loads(out.read_text())
    assert snap["view"] == "full" and snap["nodes"]


def test_experiment_availability(tmp_path):
    cfg = _sim_config(tmp_path, experiment="availability", availability={"n": 40})
    out, samples, table = tmp_path / "a.json", tmp_path / "s.txt", tmp_path / "t.tsv"
    assert main(["experiment", "availability", "--config", str(cfg), "--out", str(out),
                 "--samples", str(samples), "--table", str(table)]) == 0
    result = json.loads(out.read_text())
    xs = [float(l) for l in samples.read_text().splitlines()]
    assert xs == result["samples_ms"] and len(xs) == 40
    assert table.read_text().startswith("n\tmean_ms")


def test_experiment_availability_empty(tmp_path):
    cfg = _sim_config(tmp_path, experiment="availability", availability={"n": 0})
    out = tmp_path / "a.json"
    assert main(["experiment", "availability", "--config", str(cfg), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["stats"]["n"] == 0


def test_experiment_gateway_matrix(tmp_path):
    gws = [{"name": "slow", "model": {"type": "fixed", "ms": 6000}}, *FAST]
    cfg = _sim_config(tmp_path, experiment="gateway_matrix", gateways=gws,
                      gateway_matrix={"cids": 2, "repeats": 3})
    out, table = tmp_path / "m.json", tmp_path / "m.tsv"
    assert main(["experiment", "gateway_matrix", "--config", str(cfg), "--out", str(out), "--table", str(table)]) == 0
    rows = {r["gateway"]: r for r in json.loads(out.read_text())["rows"]}
    assert rows["slow"]["dropped@3000ms"] == rows["slow"]["requests@3000ms"] == 6
    assert len(table.read_text().splitlines()) == 4


def test_probe_plan_rejected(tmp_path):
    plan = tmp_path / "p.json"
    plan.write_text(json.dumps({"gateways": ["https://x"], "cids": ["bad"]}))
    assert main(["probe", "run", "--plan", str(plan)]) == 2
    assert main(["probe", "run", "--rate-s", "0.1"]) == 2
