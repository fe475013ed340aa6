"""One-step (latency, cost) predictors usable by the adaptation loop, and model files."""

from __future__ import annotations

import json

import numpy as np

from .baselines import Arima110Model, fit_arima_110
from .errors import InvalidInputError, SchemaError
from .rnn import forward_batch, genome_from_dict, genome_to_dict
from .rnn.genome import RnnGenome
from .trace import NormParams, TraceDataset

TARGETS = ("latency", "cost")
MODEL_FORMAT = "tva-model"


def _cols(channels, names):
    try:
        return [list(channels).index(n) for n in names]
    except ValueError:
        raise InvalidInputError(f"history lacks one of {names} (has {list(channels)})") from None


class PersistencePredictor:
    kind = "persistence"

    def predict(self, history, channels):
        if len(history) == 0:
            raise InvalidInputError("persistence needs at least one observation")
        return tuple(float(history[-1, j]) for j in _cols(channels, TARGETS))

    def to_dict(self):
        return {"model": self.kind}


class ArimaPredictor:
    """Independent ARIMA(1,1,0) per target channel, driven by the observed history."""

    kind = "arima"

    def __init__(self, models: dict[str, Arima110Model]):
        self.models = models

    @classmethod
    def fit(cls, ds: TraceDataset, stop=None):
        return cls({ch: fit_arima_110(ds.raw(ch)[:stop]) for ch in TARGETS})

    def predict(self, history, channels):
        if len(history) < 2:
            raise InvalidInputError("ARIMA(1,1,0) needs two observations")
        out = []
        for ch, j in zip(TARGETS, _cols(channels, TARGETS)):
            x1, x0 = float(history[-1, j]), float(history[-2, j])
            out.append(x1 + self.models[ch].phi * (x1 - x0))
        return tuple(out)

    def to_dict(self):
        return {"model": self.kind, "channels": {ch: m.to_dict() for ch, m in self.models.items()}}


class GenomePredictor:
    """Feed the last ``seq_len`` observations through a trained genome.

    History rows are min-max scaled with ``norm``; the final step's outputs
    are mapped back to raw units.
    """

    def __init__(self, genome: RnnGenome, norm: NormParams, seq_len: int, kind="ernn"):
        self.genome = genome
        self.norm = norm
        self.seq_len = int(seq_len)
        self.kind = kind
        if tuple(genome.output_channels) != TARGETS:
            raise InvalidInputError(f"genome must predict {TARGETS}, predicts {genome.output_channels}")

    def _scale(self, rows, channels):
        cols = _cols(channels, self.genome.input_channels)
        x = rows[..., cols].astype(float)
        for k, ch in enumerate(self.genome.input_channels):
            x[..., k] = self.norm.apply(ch, x[..., k])
        return x

    def _unscale(self, y):
        return np.column_stack([self.norm.inverse(ch, y[:, k]) for k, ch in enumerate(TARGETS)])

    def predict(self, history, channels):
        if len(history) < self.seq_len:
            raise InvalidInputError(f"need {self.seq_len} observations, have {len(history)}")
        x = self._scale(np.asarray(history[-self.seq_len:]), channels)
        y = forward_batch(self.genome, x[None])[:, -1, :]
        lat, cost = self._unscale(y)[0]
        return float(lat), float(cost)

    def predict_many(self, ds: TraceDataset, start, stop):
        """Forecasts for rows ``start:stop`` at once; row t sees rows [t - seq_len, t)."""
        if start < self.seq_len:
            raise InvalidInputError("start must leave seq_len rows of history")
        hist = np.column_stack([ds.raw(ch) for ch in ds.channels])
        idx = np.arange(start, stop)[:, None] + np.arange(-self.seq_len, 0)[None, :]
        x = self._scale(hist[idx], ds.channels)
        return self._unscale(forward_batch(self.genome, x)[:, -1, :])

    def to_dict(self):
        return {"model": self.kind, "seq_len": self.seq_len, "norm": self.norm.to_dict(),
                "genome": genome_to_dict(self.genome)}


class OraclePredictor:
    """Returns the observed value of the step being predicted (perfect information)."""

    kind = "oracle"

    def __init__(self, ds: TraceDataset):
        self.truth = np.column_stack([ds.raw(ch) for ch in TARGETS])

    def predict(self, history, channels):
        return tuple(float(v) for v in self.truth[len(history)])

    def to_dict(self):
        return {"model": self.kind}


def one_step_forecasts(predictor, ds: TraceDataset, start, stop) -> np.ndarray:
    """(stop - start, 2) raw-unit (latency, cost) forecasts with teacher-forced history."""
    if hasattr(predictor, "predict_many"):
        return predictor.predict_many(ds, start, stop)
    hist = np.column_stack([ds.raw(ch) for ch in ds.channels])
    return np.array([predictor.predict(hist[:t], ds.channels) for t in range(start, stop)], dtype=float)


def model_to_json(predictor) -> str:
    d = {"format": MODEL_FORMAT, **predictor.to_dict()}
    return json.dumps(d, indent=1, sort_keys=True) + "\n"


def model_from_json(text: str):
    d = json.loads(text)
    if d.get("format") != MODEL_FORMAT:
        raise SchemaError("not a tva model file")
    kind = d.get("model")
    if kind == "persistence":
        return PersistencePredictor()
    if kind == "arima":
        return ArimaPredictor({ch: Arima110Model.from_dict(m) for ch, m in d["channels"].items()})
    if kind in ("ernn", "mlp", "lstm"):
        return GenomePredictor(genome_from_dict(d["genome"]), NormParams.from_dict(d["norm"]), d["seq_len"], kind)
    raise SchemaError(f"unknown model kind {kind!r}")
