import time

import numpy as np
import pytest

from tva import trace
from tva.datagen import ProbeConfig, SynthConfig, probe_once, run_collection, synth_trace
from tva.errors import ConfigError


def test_same_seed_bit_identical():
    a = synth_trace(SynthConfig(length=2000, seed=11, urt_mode="informative"))
    b = synth_trace(SynthConfig(length=2000, seed=11, urt_mode="informative"))
    assert trace.format_trace(a) == trace.format_trace(b)
    c = synth_trace(SynthConfig(length=2000, seed=12))
    assert not np.array_equal(a.column("latency"), c.column("latency"))


def test_no_spikes_stays_within_six_sd():
    cfg = SynthConfig(spike_prob=0.0, seed=3)
    lat = synth_trace(cfg).column("latency")
    assert lat.max() <= cfg.latency_base + 6 * cfg.latency_noise_sd


def test_heavy_upper_tail_with_spikes():
    cfg = SynthConfig(seed=3)
    lat = synth_trace(cfg).column("latency")
    assert np.percentile(lat, 99.9) / np.median(lat) > cfg.spike_scale / 2


def _lead_corr(ds):
    ping, lat = ds.column("urt_ping"), ds.column("latency")
    return np.corrcoef(ping[:-1], lat[1:])[0, 1]


def test_urt_modes_correlation():
    assert _lead_corr(synth_trace(SynthConfig(seed=5, urt_mode="informative"))) > 0.5
    assert abs(_lead_corr(synth_trace(SynthConfig(seed=5, urt_mode="pure_noise")))) < 0.1
    assert "urt_ping" not in synth_trace(SynthConfig(length=10, seed=5)).channels


def test_urt_mode_leaves_latency_and_cost_alone():
    a = synth_trace(SynthConfig(length=3000, seed=9))
    b = synth_trace(SynthConfig(length=3000, seed=9, urt_mode="informative"))
    np.testing.assert_array_equal(a.column("latency"), b.column("latency"))
    np.testing.assert_array_equal(a.column("cost"), b.column("cost"))


def test_cost_regimes_and_range():
    ds = synth_trace(SynthConfig(length=3000, seed=2, cost_base=0.3, cost_noise_sd=0.01,
                                 cost_regimes=[(1000, 0.6), (2000, 0.1)]))
    cost = ds.column("cost")
    assert cost.min() >= 0 and cost.max() <= 1
    assert np.mean(cost[:1000]) == pytest.approx(0.3, abs=0.01)
    assert np.mean(cost[1000:2000]) == pytest.approx(0.6, abs=0.01)
    assert np.mean(cost[2000:]) == pytest.approx(0.1, abs=0.01)


@pytest.mark.parametrize("kw", [dict(length=0), dict(latency_ar=1.0), dict(spike_prob=1.0),
                                dict(urt_mode="bogus"), dict(cost_regimes=[(5, 1.5)])])
def test_invalid_synth_config(kw):
    with pytest.raises(ConfigError):
        SynthConfig(**kw)


def test_probe_against_fixture(http_server):
    r = probe_once(ProbeConfig(http_server + "/file", ping_target=http_server + "/ping", timeout=5))
    assert r.latency > 0
    assert 0 <= r.cost <= 1
    assert r.urt_available == 1 and r.urt_ping >= 0
    assert not r.flagged


def test_probe_unreachable_ping(http_server):
    r = probe_once(ProbeConfig(http_server + "/file", ping_target="127.0.0.1:9", timeout=2))
    assert r.urt_available == 0
    assert not r.flagged


def test_probe_unreachable_target():
    r = probe_once(ProbeConfig("http://127.0.0.1:9/file", timeout=1.5))
    assert r.flagged and r.urt_available == 0
    assert r.latency == 1.5


def test_collection_appends_rows(http_server, tmp_path):
    sink = tmp_path / "live.csv"
    cfg = ProbeConfig(http_server + "/file", interval=0.01, count=3, timeout=5)
    assert run_collection(cfg, sink) == 3
    ds = trace.read_trace(sink)
    assert len(ds) == 3 and list(ds.seq_index) == [0, 1, 2]
    run_collection(cfg, sink)  # seq_index continues across runs
    assert list(trace.read_trace(sink).seq_index) == list(range(6))


def test_collection_interval_spacing(http_server, tmp_path):
    t0 = time.monotonic()
    run_collection(ProbeConfig(http_server + "/ping", interval=0.1, count=10, timeout=5), tmp_path / "x.csv")
    assert time.monotonic() - t0 >= 0.9


def test_interrupted_collection_keeps_complete_rows(http_server, tmp_path):
    sink = tmp_path / "partial.csv"
    calls = []

    def flaky(cfg, idx):
        if len(calls) == 2:
            raise KeyboardInterrupt
        calls.append(idx)
        return probe_once(cfg, idx)

    with pytest.raises(KeyboardInterrupt):
        run_collection(ProbeConfig(http_server + "/ping", interval=0.01, count=5, timeout=5), sink, probe=flaky)
    lines = sink.read_text().splitlines()
    assert len(lines) == 3  # header + 2 rows
    assert len(trace.read_trace(sink)) == 2


@pytest.mark.parametrize("kw", [dict(interval=0), dict(count=0), dict(target_url="")])
def test_invalid_probe_config(kw):
    with pytest.raises(ConfigError):
        ProbeConfig(**{"target_url": "http://x", **kw})
