import json
import signal
import subprocess
import sys
import time

import pytest

from tva.cli import main
from tva.decision import parse_outcomes
from tva.metrics import EvalReport
from tva.trace import read_trace


def _cfg(tmp_path, **sections):
    p = tmp_path / "run.json"
    p.write_text(json.dumps(sections))
    return str(p)


@pytest.fixture
def trace_csv(tmp_path):
    out = tmp_path / "trace.csv"
    assert main(["synth", "--seed", "3", "--set", "synth.length=2000", "--out", str(out)]) == 0
    return out


def test_synth_deterministic(tmp_path, trace_csv):
    again = tmp_path / "again.csv"
    assert main(["synth", "--seed", "3", "--set", "synth.length=2000", "--out", str(again)]) == 0
    assert again.read_bytes() == trace_csv.read_bytes()
    assert len(read_trace(trace_csv)) == 2000


def test_seed_precedence(tmp_path, monkeypatch):
    cfg = _cfg(tmp_path, seed=1, synth={"length": 50})
    a, b, c = (tmp_path / f"{k}.csv" for k in "abc")
    main(["synth", "--config", cfg, "--out", str(a)])
    monkeypatch.setenv("TVA_SEED", "2")
    main(["synth", "--config", cfg, "--out", str(b)])
    main(["synth", "--config", cfg, "--seed", "1", "--out", str(c)])
    assert a.read_bytes() != b.read_bytes()
    assert a.read_bytes() == c.read_bytes()


@pytest.mark.parametrize("args", [
    ["synth", "--set", "synth.latency_ar=2", "--out", "x.csv"],
    ["synth", "--set", "synth.bogus=1", "--out", "x.csv"],
    ["synth", "--set", "nosuch.key=1", "--out", "x.csv"],
    ["synth"],
])
def test_invalid_config_exit_2(tmp_path, capsys, monkeypatch, args):
    monkeypatch.chdir(tmp_path)
    assert main(args) == 2
    assert "tva synth:" in capsys.readouterr().err


def test_missing_trace_exit_2(tmp_path):
    assert main(["train", "--seed", "1", "--trace", str(tmp_path / "nope.csv"),
                 "--model-out", str(tmp_path / "m.json")]) == 2


def test_persistence_train_simulate_evaluate(tmp_path, trace_csv):
    cfg = _cfg(tmp_path, train={"model": "persistence"}, decide={"threshold": 900.0})
    model = tmp_path / "m.json"
    assert main(["train", "--config", cfg, "--trace", str(trace_csv), "--model-out", str(model)]) == 0
    assert json.loads(model.read_text()) == {"format": "tva-model", "model": "persistence"}
    assert not (tmp_path / "m.json.searchlog.csv").exists()
    outc = tmp_path / "o.csv"
    assert main(["simulate", "--config", cfg, "--trace", str(trace_csv), "--model-in", str(model),
                 "--outcomes", str(outc)]) == 0
    meta, outs = parse_outcomes(outc.read_text())
    assert meta["threshold"] == "900.0" and meta["model"] == "persistence"
    assert len(outs) == 300 - 16  # validation rows minus seq_len
    rep = tmp_path / "r.json"
    assert main(["evaluate", str(outc), "--report", str(rep)]) == 0
    report = EvalReport.from_json(rep.read_text())
    assert list(report.sources) == ["synthetic"]


def test_oracle_simulation(tmp_path, trace_csv):
    outc, rep = tmp_path / "o.csv", tmp_path / "r.json"
    assert main(["simulate", "--trace", str(trace_csv), "--oracle", "--outcomes", str(outc)]) == 0
    assert main(["evaluate", str(outc), "--report", str(rep)]) == 0
    assert json.loads(rep.read_text())["sources"]["synthetic"]["oracle"]["decisions"]["accuracy"] == 1.0


def test_ernn_training_small_budget(tmp_path, trace_csv):
    cfg = _cfg(tmp_path, seed=1, train={"model": "ernn", "evolve": {"max_evaluations": 5}})
    model = tmp_path / "m.json"
    t0 = time.monotonic()
    assert main(["train", "--config", cfg, "--trace", str(trace_csv), "--model-out", str(model)]) == 0
    assert time.monotonic() - t0 < 60
    log_lines = (tmp_path / "m.json.searchlog.csv").read_text().splitlines()
    assert log_lines[0] == "eval,genome_id,parent_ids,op,fitness,nodes,weights" and len(log_lines) == 6
    assert json.loads(model.read_text())["model"] == "ernn"


def test_stochastic_model_needs_seed(tmp_path, trace_csv, monkeypatch):
    monkeypatch.delenv("TVA_SEED", raising=False)
    cfg = _cfg(tmp_path, train={"model": "mlp"})
    assert main(["train", "--config", cfg, "--trace", str(trace_csv), "--model-out", str(tmp_path / "m")]) == 2


def test_evaluate_three_sources(tmp_path):
    files = []
    for k in range(3):
        t, o = tmp_path / f"t{k}.csv", tmp_path / f"o{k}.csv"
        main(["synth", "--seed", str(k), "--set", "synth.length=400", "--set", f'synth.tactic_source="server{k}"',
              "--out", str(t)])
        main(["simulate", "--trace", str(t), "--oracle", "--outcomes", str(o)])
        files.append(str(o))
    rep = tmp_path / "r.json"
    assert main(["evaluate", *files, "--report", str(rep)]) == 0
    d = json.loads(rep.read_text())
    assert sorted(d["sources"]) == ["server0", "server1", "server2"]
    assert d["overbar"]["oracle"]["sources"] == ["server0", "server1", "server2"]


def test_evaluate_malformed_exit_2(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("step,pred_latency\n1,2\n")
    assert main(["evaluate", str(bad), "--report", str(tmp_path / "r.json")]) == 2
    assert main(["evaluate", str(tmp_path / "missing.csv"), "--report", str(tmp_path / "r.json")]) == 2


def test_collect_fixture_and_unreachable(tmp_path, http_server):
    out = tmp_path / "live.csv"
    cfg = _cfg(tmp_path, probe={"target_url": http_server + "/file", "interval": 0.01, "count": 2, "timeout": 5})
    assert main(["collect", "--config", cfg, "--out", str(out)]) == 0
    assert len(read_trace(out)) == 2
    cfg = _cfg(tmp_path, probe={"target_url": http_server + "/file", "ping_target": "127.0.0.1:9",
                                "interval": 0.01, "count": 1, "timeout": 2})
    assert main(["collect", "--config", cfg, "--out", str(out)]) == 0
    ds = read_trace(out)
    assert len(ds) == 3 and ds.column("urt_available")[-1] == 0


def _tva(*args, **kw):
    return subprocess.Popen([sys.executable, "-m", "tva.cli", *args], stdout=subprocess.PIPE,
                            stderr=subprocess.PIPE, text=True, **kw)


def test_entry_point_exit_codes(tmp_path):
    p = _tva("evaluate", str(tmp_path / "none.csv"), "--report", str(tmp_path / "r.json"))
    p.communicate(timeout=60)
    assert p.returncode == 2
    p = _tva("bogus")
    p.communicate(timeout=60)
    assert p.returncode == 2


def test_collect_sigint_leaves_complete_rows(tmp_path, http_server):
    out = tmp_path / "live.csv"
    cfg = _cfg(tmp_path, probe={"target_url": http_server + "/ping", "interval": 0.3, "count": 50, "timeout": 5})
    p = _tva("collect", "--config", cfg, "--out", str(out))
    deadline = time.monotonic() + 30
    while time.monotonic() < deadline:
        if out.exists() and len(out.read_text().splitlines()) >= 3:
            break
        time.sleep(0.05)
    p.send_signal(signal.SIGINT)
    _, err = p.communicate(timeout=30)
    assert p.returncode == 1 and "interrupted" in err
    text = out.read_text()
    assert text.endswith("\n")
    ds = read_trace(out)
    assert 2 <= len(ds) < 50
    assert list(ds.seq_index) == list(range(len(ds)))


def test_simulate_output_byte_identical(tmp_path, trace_csv):
    cfg = _cfg(tmp_path, seed=4, train={"model": "mlp", "mlp_hidden": 4, "epochs": 1, "lr": 0.01})
    outs = []
    for k in range(2):
        m, o = tmp_path / f"m{k}.json", tmp_path / f"o{k}.csv"
        main(["train", "--config", cfg, "--trace", str(trace_csv), "--model-out", str(m)])
        main(["simulate", "--config", cfg, "--trace", str(trace_csv), "--model-in", str(m), "--outcomes", str(o)])
        outs.append((m.read_bytes(), o.read_bytes()))
    assert outs[0] == outs[1]
