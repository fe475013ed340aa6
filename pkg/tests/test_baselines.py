import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tests.oracles import arima_phi_oracle
from tva.baselines import (LSTM_HIDDEN, LSTM_PAPER_HIDDEN, Arima110Model, fit_arima_110, make_lstm_genome,
                           make_mlp_genome, persistence_predict, predict_arima)
from tva.errors import InvalidInputError
from tva.rnn import bptt_train, count_params, evaluate_mse, forward
from tva.trace import WindowSet


def test_arima_linear_series_forecast():
    m = fit_arima_110([1, 2, 3, 4, 5])
    assert m.forecast() == 6.0


def test_arima_constant_series():
    m = fit_arima_110([2.5] * 10)
    assert m.phi == 0.0
    assert m.forecast() == 2.5


def test_arima_needs_three_points():
    with pytest.raises(InvalidInputError):
        fit_arima_110([1.0, 2.0])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-0.9, 0.9), st.integers(5, 400))
def test_arima_matches_normal_equations(seed, phi, n):
    rng = np.random.default_rng(seed)
    d = np.zeros(n)
    for t in range(1, n):
        d[t] = phi * d[t - 1] + rng.normal()
    x = np.cumsum(d)
    assert abs(fit_arima_110(x).phi - arima_phi_oracle(x)) < 1e-8


def test_predict_arima_examples():
    assert predict_arima(Arima110Model(0.0, 4.0, 3.0)) == 4.0
    assert predict_arima(Arima110Model(1.0, 10.0, 2.0)) == 12.0
    m = Arima110Model(0.5, 10.0, 2.0)
    assert predict_arima(m, observed=11.0) == 11.5  # state rolled to (11, diff 1)


def test_arima_beats_persistence_on_ar_differences():
    rng = np.random.default_rng(8)
    d = np.zeros(4000)
    for t in range(1, d.size):
        d[t] = 0.6 * d[t - 1] + rng.normal()
    x = np.cumsum(d)
    m = fit_arima_110(x[:2000])
    arima, naive = [], []
    for t in range(2000, x.size - 1):
        arima.append(predict_arima(m) - x[t + 1])
        naive.append(x[t] - x[t + 1])
        m.update(x[t + 1])
    assert np.mean(np.square(arima)) < np.mean(np.square(naive))


def test_arima_random_walk_phi_small():
    x = np.cumsum(np.random.default_rng(3).normal(size=10_000))
    assert abs(fit_arima_110(x).phi) < 0.1


def test_persistence():
    assert persistence_predict([0.01, 0.015]) == 0.015
    with pytest.raises(InvalidInputError):
        persistence_predict([])
    assert persistence_predict([3.0, 4.0]) == predict_arima(Arima110Model(0.0, 4.0, 1.0))


def test_mlp_shape():
    g = make_mlp_genome(("a", "b"), ("y", "z"))
    assert len(g.nodes) == 104 and len(g.edges) == 400
    assert all(e.recurrent_depth == 0 for e in g.edges)
    assert g.is_valid()


def test_mlp_is_history_free(rng):
    g = make_mlp_genome(("a", "b"), ("y",), 8, rng)
    x = rng.uniform(-1, 1, (10, 2))
    y = forward(g, x)
    x2 = x.copy()
    x2[:-1] = x2[rng.permutation(9)]
    assert forward(g, x2)[-1] == pytest.approx(y[-1], abs=0)


def test_minimal_mlp_learns_linear_map(rng):
    g = make_mlp_genome(("a",), ("y",), 1, rng)
    X = rng.uniform(-0.5, 0.5, (20, 6, 1))
    w = WindowSet(("a",), ("y",), X, 0.4 * X)
    trained, _ = bptt_train(g, w, epochs=100, lr=0.1)
    assert evaluate_mse(trained, w) < 0.5 * evaluate_mse(g, w)


def test_lstm_genome_sizes():
    g = make_lstm_genome(("a", "b"), ("y", "z"))
    assert len(g.hidden()) == LSTM_HIDDEN == 32
    assert count_params(g) == (36, 2 * 32 + 32 * 2 + 12 * 32)
    big = make_lstm_genome(("a", "b"), ("y", "z"), LSTM_PAPER_HIDDEN)
    assert len(big.hidden()) == 1000 and big.is_valid()
    for bad in (make_lstm_genome, make_mlp_genome):
        with pytest.raises(InvalidInputError):
            bad(("a",), ("y",), 0)
