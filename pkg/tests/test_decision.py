import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tests.oracles import utility_by_hand
from tva.decision import (PASS, UPDATE, DecisionOutcome, SlaParams, UtilityParams, decide, format_outcomes,
                          parse_outcomes, run_adaptation_loop, sla_utility, tag_of, utility, utility_gain_loss)
from tva.errors import ConfigError, ParseError, UtilityDomainError
from tva.predictors import OraclePredictor, PersistencePredictor
from tva.trace import TraceDataset

P = UtilityParams()


def test_utility_examples():
    assert utility(P, 0.015, 0.135) == pytest.approx(1000.0, rel=1e-12)
    assert utility(P, 0.15, 0.15) == 500.0
    with pytest.raises(UtilityDomainError):
        utility(P, 0.0, 0.0)


def test_sla_utility_examples():
    base = dict(tau=60, a=10, r=0.5, k=20, d=0.5, R_O=2, R_M=1, C=3, T=1.0)
    assert sla_utility(SlaParams(**base)) == 300.0
    assert sla_utility(SlaParams(**{**base, "d": 1.0})) == 60 * 10 * 2 / 3
    assert sla_utility(SlaParams(**{**base, "r": 2.0, "a": 25, "k": 20})) == 0.0
    assert sla_utility(SlaParams(**{**base, "r": 2.0})) == 60 * (10 - 20) * 2 / 3
    with pytest.raises(UtilityDomainError):
        sla_utility(SlaParams(**{**base, "C": 0}))
    with pytest.raises(ConfigError):
        SlaParams(**{**base, "d": 1.5})


def test_decide_examples():
    assert decide(1000.0, P) == UPDATE
    assert decide(utility(P, 0.015, 0.135), P) == UPDATE
    assert decide(999.99, P) == PASS
    zero = UtilityParams(threshold=0)
    assert all(decide(u, zero) == UPDATE for u in (1e-9, 1.0, 1e6))
    with pytest.raises(ConfigError):
        UtilityParams(reward=0)


def test_tags():
    assert [tag_of(a, b) for a, b in [(UPDATE, UPDATE), (UPDATE, PASS), (PASS, UPDATE), (PASS, PASS)]] == \
        ["TP", "FP", "FN", "TN"]


# latency/cost pairs chosen so latency + cost is exact in binary, reward 1000:
# utilities 1000 (tie), 800, 1333.3, 1142.9, 666.7, 666.7, 500
SIX_STEP = [(0.25, 0.75), (0.5, 0.75), (0.25, 0.5), (0.125, 0.75), (1.0, 0.5), (0.75, 0.75), (1.5, 0.5)]


def _six_step():
    lat, cost = zip(*SIX_STEP)
    return TraceDataset(np.arange(7), {"latency": lat, "cost": cost})


def test_hand_enumerated_fixture():
    p = UtilityParams(reward=1000.0, threshold=1000.0)
    out = run_adaptation_loop(PersistencePredictor(), _six_step(), p, start=1)
    # step t predicts with row t-1 (persistence) and is scored against row t
    assert [o.tag for o in out] == ["FP", "FN", "TP", "FP", "TN", "TN"]
    assert [o.step for o in out] == [1, 2, 3, 4, 5, 6]
    assert out[0].predicted_utility == 1000.0
    assert out[2].true_utility == pytest.approx(utility_by_hand(1000, 0.125, 0.75))


def test_oracle_loop(small_trace):
    out = run_adaptation_loop(OraclePredictor(small_trace), small_trace, P)
    assert {o.tag for o in out} <= {"TP", "TN"}
    assert {o.tag for o in out} == {"TP", "TN"}  # both classes occur at reward 150
    assert utility_gain_loss(out)[1] == 0


def test_zero_predictor_forces_pass(small_trace):
    class Zero:
        def predict(self, history, channels):
            return 0.0, 0.0

    out = run_adaptation_loop(Zero(), small_trace, P, 0, 20)
    assert all(o.predicted_decision == PASS and o.flagged for o in out)
    assert all(math.isnan(o.predicted_utility) for o in out)


def test_failing_predictor_is_flagged(small_trace):
    out = run_adaptation_loop(PersistencePredictor(), small_trace, P, 0, 3)
    assert out[0].flagged and out[0].predicted_decision == PASS  # no history at t=0
    assert not out[1].flagged


def test_gain_loss_examples():
    tn = DecisionOutcome(0, 1, 1, 1, 1, 500, 500, PASS, PASS, "TN")
    tp = DecisionOutcome(1, 1, 1, 1, 1, 1300, 1200, UPDATE, UPDATE, "TP")
    assert utility_gain_loss([tn, tn]) == (0.0, 0.0)
    assert utility_gain_loss([tn, tp]) == (1200.0, 0.0)


def _random_outcomes(rng, n, threshold=1000.0):
    p = UtilityParams(threshold=threshold)
    true_u = rng.uniform(300, 2000, n)
    pred_u = true_u * rng.uniform(0.7, 1.3, n)
    out = []
    for k in range(n):
        a, b = decide(pred_u[k], p), decide(true_u[k], p)
        out.append(DecisionOutcome(k, 0.1, 0.1, 0.1, 0.1, pred_u[k], true_u[k], a, b, tag_of(a, b)))
    return out


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1), st.integers(1, 300))
def test_gain_loss_partition(seed, n):
    out = _random_outcomes(np.random.default_rng(seed), n)
    gain, loss = utility_gain_loss(out)
    assert gain + loss == pytest.approx(sum(o.true_utility for o in out if o.true_decision == UPDATE))


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.floats(100, 2000), st.floats(0, 500))
def test_threshold_monotone(seed, thr, bump):
    rng = np.random.default_rng(seed)
    u = rng.uniform(0, 3000, 50)
    n_lo = sum(decide(x, UtilityParams(threshold=thr)) == UPDATE for x in u)
    n_hi = sum(decide(x, UtilityParams(threshold=thr + bump)) == UPDATE for x in u)
    assert n_hi <= n_lo


@pytest.mark.parametrize("scale", [0.5, 2.0, 7.0])
def test_reward_threshold_scaling(small_trace, scale):
    base = run_adaptation_loop(PersistencePredictor(), small_trace, P, 1, 200)
    scaled = run_adaptation_loop(PersistencePredictor(), small_trace,
                                 UtilityParams(P.reward * scale, P.threshold * scale), 1, 200)
    assert [o.tag for o in base] == [o.tag for o in scaled]


def test_outcomes_csv_round_trip(small_trace):
    out = run_adaptation_loop(PersistencePredictor(), small_trace, P, 0, 30)
    text = format_outcomes(out, {"source": "s", "threshold": 1000.0})
    assert text.startswith("# source=s\n# threshold=1000.0\nstep,pred_latency")
    meta, back = parse_outcomes(text)
    assert meta == {"source": "s", "threshold": "1000.0"}
    assert [o.tag for o in back] == [o.tag for o in out]
    assert back[0].flagged and not back[1].flagged
    assert format_outcomes(back, meta) == text


def test_outcomes_parse_rejects_inconsistent_tag():
    text = ("step,pred_latency,pred_cost,true_latency,true_cost,pred_U,true_U,pred_decision,true_decision,tag\n"
            "0,0.1,0.1,0.1,0.1,750.0,750.0,Pass,Pass,TP\n")
    with pytest.raises(ParseError):
        parse_outcomes(text)
