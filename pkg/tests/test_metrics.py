import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tva.decision import PASS, UPDATE, DecisionOutcome, UtilityParams, run_adaptation_loop, tag_of
from tva.errors import InvalidInputError, SchemaError
from tva.metrics import (EvalReport, average_over_sources, build_report, decision_metrics, evaluate_outcomes,
                         regression_metrics, utility_mape)
from tva.predictors import OraclePredictor

_DEC = {"TP": (UPDATE, UPDATE), "FP": (UPDATE, PASS), "TN": (PASS, PASS), "FN": (PASS, UPDATE)}


def _outcomes(tp=0, fp=0, tn=0, fn=0, u=1200.0):
    out = []
    for tag, n in (("TP", tp), ("FP", fp), ("TN", tn), ("FN", fn)):
        a, b = _DEC[tag]
        out += [DecisionOutcome(len(out), 0.1, 0.1, 0.1, 0.1, u, u, a, b, tag) for _ in range(n)]
    return out


def test_regression_identity_and_simple():
    m = regression_metrics([1.0, 2.0], [1.0, 2.0])
    assert (m.mse, m.mae, m.mape) == (0.0, 0.0, 0.0)
    m = regression_metrics([0, 2], [1, 1])
    assert (m.mse, m.mae, m.mape) == (1.0, 1.0, 100.0)


def test_mape_percent_convention():
    assert regression_metrics([1210.0], [1000.0]).mape == pytest.approx(21.0, rel=1e-12)


def test_mape_epsilon_exclusion():
    m = regression_metrics([1.0, 2.0, 3.0], [0.0, 2.0, 0.0])
    assert m.mape == 0.0 and m.mape_excluded == 2
    assert m.mse == pytest.approx(10 / 3)
    m = regression_metrics([1.0], [0.0])
    assert m.mape is None and m.mse == 1.0
    with pytest.raises(InvalidInputError):
        regression_metrics([1.0], [1.0, 2.0])
    with pytest.raises(InvalidInputError):
        regression_metrics([], [])


@settings(max_examples=100)
@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=1, max_size=60))
def test_regression_against_loops(pairs):
    pred, truth = zip(*pairs)
    m = regression_metrics(pred, truth)
    mse = 0.0
    mae = 0.0
    for p, t in pairs:
        mse += (t - p) ** 2
        mae += abs(t - p)
    assert m.mse == pytest.approx(mse / len(pairs), rel=1e-9, abs=1e-12)
    assert m.mae ** 2 <= m.mse * (1 + 1e-12) + 1e-12


def test_decision_metrics_fixture():
    d = decision_metrics(_outcomes(tp=3, fp=1, tn=5, fn=1))
    assert d.fpr == 0.25
    assert d.fnr == pytest.approx(1 / 6)
    assert d.accuracy == 0.8
    assert d.fpr_standard == pytest.approx(1 / 6) and d.fnr_standard == 0.25
    assert d.u_gain == 3 * 1200.0 and d.u_loss == 1200.0


def test_decision_metrics_all_tn():
    d = decision_metrics(_outcomes(tn=4))
    assert (d.fpr, d.fnr, d.accuracy) == (0.0, 0.0, 1.0)
    assert d.fpr_undefined and not d.fnr_undefined


def test_decision_metrics_oracle(small_trace):
    d = decision_metrics(run_adaptation_loop(OraclePredictor(small_trace), small_trace, UtilityParams()))
    assert (d.fp, d.fn, d.fpr, d.fnr, d.accuracy, d.u_loss) == (0, 0, 0.0, 0.0, 1.0, 0.0)


@settings(max_examples=100)
@given(st.lists(st.sampled_from(["TP", "FP", "TN", "FN"]), min_size=1, max_size=80), st.randoms())
def test_decision_counts_partition_and_order_free(tags, rnd):
    out = [DecisionOutcome(k, 0.1, 0.1, 0.1, 0.1, 900, 900, *_DEC[t], t) for k, t in enumerate(tags)]
    d = decision_metrics(out)
    assert d.tp + d.fp + d.tn + d.fn == len(out)
    rnd.shuffle(out)
    assert decision_metrics(out).accuracy == d.accuracy


def test_utility_mape_skips_failed_steps():
    a = DecisionOutcome(0, 0.1, 0.1, 0.1, 0.1, 1210.0, 1000.0, UPDATE, UPDATE, "TP")
    b = DecisionOutcome(1, float("nan"), float("nan"), 0.1, 0.1, float("nan"), 1000.0, PASS, UPDATE, "FN", True)
    assert utility_mape([a, b]) == pytest.approx(21.0)
    assert utility_mape([b]) is None


def test_average_over_sources_examples():
    one = {"s1": {"m": {"latency": {"mse": 2.0}}}}
    assert average_over_sources(one)["m"]["latency"] == {"mse": 2.0}
    two = {"s1": {"m": {"latency": {"mse": 2.0}, "cost": {"mse": 1.0}}},
           "s2": {"m": {"latency": {"mse": 4.0}}}}
    avg = average_over_sources(two)["m"]
    assert avg["latency"]["mse"] == 3.0
    assert avg["cost"]["mse"] == 1.0
    assert avg["sources"] == ["s1", "s2"]
    assert any("cost.mse" in n and "s2" in n for n in avg["notes"])


def _loop(rng, n=40):
    out = []
    p = UtilityParams()
    for k in range(n):
        lat, cost = rng.uniform(0.05, 0.2, 2)
        pl, pc = lat * rng.uniform(0.8, 1.2), cost * rng.uniform(0.8, 1.2)
        tu, pu = p.reward / (lat + cost), p.reward / (pl + pc)
        a, b = (UPDATE if pu >= 1000 else PASS), (UPDATE if tu >= 1000 else PASS)
        out.append(DecisionOutcome(k, pl, pc, lat, cost, pu, tu, a, b, tag_of(a, b)))
    return out


def test_report_round_trip_and_models(rng):
    results = {f"server{k}": {"ernn": _loop(rng), "arima": _loop(rng)} for k in range(3)}
    rep = build_report(results)
    text = rep.to_json()
    back = EvalReport.from_json(text)
    assert back.to_json() == text
    assert set(back.sources) == {"server0", "server1", "server2"}
    assert set(back.overbar) == {"ernn", "arima"}
    e = back.sources["server1"]["arima"]
    assert {"latency", "cost", "utility_mape", "decisions"} <= set(e)
    mse = np.mean([back.sources[s]["ernn"]["latency"]["mse"] for s in back.sources])
    assert back.overbar["ernn"]["latency"]["mse"] == pytest.approx(mse)


def test_report_with_empty_decision_section():
    entry = evaluate_outcomes([])
    assert entry["decisions"] == {}
    rep = EvalReport({"s": {"m": entry}}, average_over_sources({"s": {"m": entry}}))
    assert json.loads(rep.to_json())["sources"]["s"]["m"]["decisions"] == {}
    with pytest.raises(SchemaError):
        EvalReport.from_json('{"format": "other"}')
