"""Reference predictors: persistence, ARIMA(1,1,0) and fixed-architecture genomes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .rnn.genome import EdgeGene, RnnGenome, build_genome, new_node

MLP_HIDDEN = 100
LSTM_HIDDEN = 32
#: hidden size of the LSTM network used in the original experiments
LSTM_PAPER_HIDDEN = 1000


@dataclass
class Arima110Model:
    """ARIMA(1,1,0) without intercept: d_t = phi * d_{t-1} on the differenced series."""

    phi: float
    last_value: float
    last_diff: float

    def forecast(self) -> float:
        return self.last_value + self.phi * self.last_diff

    def update(self, observed: float) -> None:
        """Roll the state forward with the true next value (teacher forcing)."""
        self.last_diff = observed - self.last_value
        self.last_value = observed

    def to_dict(self):
        return {"phi": self.phi, "last_value": self.last_value, "last_diff": self.last_diff}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["phi"]), float(d["last_value"]), float(d["last_diff"]))


def fit_arima_110(series) -> Arima110Model:
    """Least-squares AR(1) slope (no intercept) on the once-differenced series."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 3:
        raise InvalidInputError("ARIMA(1,1,0) needs a univariate series of length >= 3")
    d = np.diff(x)
    prev, cur = d[:-1], d[1:]
    den = float(prev @ prev)
    phi = float(prev @ cur) / den if den > 0 else 0.0
    return Arima110Model(phi, float(x[-1]), float(d[-1]))


def predict_arima(m: Arima110Model, observed: float | None = None) -> float:
    """One-step forecast; ``observed`` first rolls the state forward by one true value."""
    if observed is not None:
        m.update(float(observed))
    return m.forecast()


def persistence_predict(series) -> float:
    x = np.asarray(series, dtype=float).reshape(-1)
    if x.size == 0:
        raise InvalidInputError("persistence needs at least one observation")
    return float(x[-1])


def _layered(input_channels, output_channels, hidden, kind, rng):
    g, in_ids, out_ids = build_genome(input_channels, output_channels)
    nid = len(in_ids) + len(out_ids)
    hid = []
    for _ in range(hidden):
        g.nodes.append(new_node(nid, kind, 0.5, rng))
        hid.append(nid)
        nid += 1
    eid = 0

    def w():
        return float(rng.normal(0.0, 0.1)) if rng is not None else 0.0

    for h in hid:
        for i in in_ids:
            g.edges.append(EdgeGene(eid, i, h, w()))
            eid += 1
    for o in out_ids:
        for h in hid:
            g.edges.append(EdgeGene(eid, h, o, w()))
            eid += 1
    return g


def make_mlp_genome(input_channels, output_channels, hidden=MLP_HIDDEN, rng=None) -> RnnGenome:
    """Feedforward net: inputs -> ``hidden`` tanh units -> linear outputs, fully connected."""
    if hidden < 1:
        raise InvalidInputError("hidden must be >= 1")
    return _layered(input_channels, output_channels, hidden, "simple", rng)


def make_lstm_genome(input_channels, output_channels, hidden=LSTM_HIDDEN, rng=None) -> RnnGenome:
    """Single LSTM layer: every input feeds every LSTM cell, every cell feeds every output."""
    if hidden < 1:
        raise InvalidInputError("hidden must be >= 1")
    return _layered(input_channels, output_channels, hidden, "lstm", rng)
