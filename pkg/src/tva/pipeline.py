"""End-to-end experiment steps shared by the CLI, demos and acceptance tests."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import trace
from .baselines import LSTM_HIDDEN, LSTM_PAPER_HIDDEN, MLP_HIDDEN, make_lstm_genome, make_mlp_genome
from .decision import UtilityParams, run_adaptation_loop
from .errors import ConfigError
from .neuroevolution import EvolveConfig, evolve
from .predictors import (
    TARGETS,
    ArimaPredictor,
    GenomePredictor,
    OraclePredictor,
    PersistencePredictor,
    one_step_forecasts,
)
from .rnn import bptt_train, evaluate_mse

log = logging.getLogger(__name__)

MODELS = ("ernn", "arima", "mlp", "lstm", "persistence")


def _from_dict(cls, d):
    try:
        return cls(**(d or {}))
    except TypeError as exc:
        raise ConfigError(f"{cls.__name__}: {exc}") from None


@dataclass
class PrepareConfig:
    split_fractions: tuple = (0.7, 0.15, 0.15)
    split_counts: tuple | None = None
    seq_len: int = trace.DEFAULT_SEQ_LEN
    use_urt: bool = False
    urt_path: str | None = None
    downsample: int = 1
    train_stride: int = 1

    @classmethod
    def from_dict(cls, d):
        return _from_dict(cls, d)


@dataclass
class TrainConfig:
    model: str = "ernn"
    evolve: dict = field(default_factory=dict)
    epochs: int = 10
    lr: float = 0.001
    clip: float = 1.0
    batch_size: int = 1
    mlp_hidden: int = MLP_HIDDEN
    lstm_hidden: int | str = LSTM_HIDDEN

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.lstm_hidden == "paper":
            self.lstm_hidden = LSTM_PAPER_HIDDEN

    @classmethod
    def from_dict(cls, d):
        return _from_dict(cls, d)


@dataclass
class Prepared:
    raw: trace.TraceDataset
    norm: trace.TraceDataset
    windows: dict
    input_channels: tuple
    seq_len: int

    @property
    def val_range(self):
        lo, hi = self.raw.split_bounds()["val"]
        return lo + self.seq_len, hi


def prepare(ds: trace.TraceDataset, cfg: PrepareConfig, urt: trace.TraceDataset | None = None) -> Prepared:
    """Merge URT channels, downsample, split, normalize and window a raw trace."""
    if urt is not None:
        ds = trace.merge_urt(ds, urt)
    if cfg.downsample != 1:
        ds = trace.downsample(ds, cfg.downsample)
    ds = trace.split_chronological(ds, tuple(cfg.split_fractions), cfg.split_counts)
    norm = trace.normalize_fit_apply(ds)
    inputs = tuple(TARGETS)
    if cfg.use_urt:
        urt_chs = tuple(ch for ch in trace.URT_CHANNELS if ch in ds.columns)
        if not urt_chs:
            raise ConfigError("use_urt is set but the trace has no URT channels")
        inputs += urt_chs
    windows = trace.make_windows(norm, inputs, TARGETS, cfg.seq_len)
    if cfg.train_stride > 1:
        tr = windows["train"]
        windows["train"] = tr.take(np.arange(0, len(tr), cfg.train_stride))
    return Prepared(ds, norm, windows, inputs, cfg.seq_len)


def train(prep: Prepared, cfg: TrainConfig, seed: int = 0):
    """Fit the configured model; returns (predictor, SearchLog or None)."""
    if cfg.model == "persistence":
        return PersistencePredictor(), None
    if cfg.model == "arima":
        _, hi = prep.raw.split_bounds()["train"]
        return ArimaPredictor.fit(prep.raw, stop=hi), None
    w = prep.windows
    if cfg.model == "ernn":
        ecfg = EvolveConfig.from_dict({"seed": seed, **cfg.evolve})
        best, slog = evolve(ecfg, w["train"], w["test"])
        return GenomePredictor(best, prep.norm.norm, prep.seq_len, "ernn"), slog
    rng = np.random.default_rng(seed)
    if cfg.model == "mlp":
        g = make_mlp_genome(prep.input_channels, TARGETS, cfg.mlp_hidden, rng)
    else:
        g = make_lstm_genome(prep.input_channels, TARGETS, int(cfg.lstm_hidden), rng)
    g, losses = bptt_train(g, w["train"], cfg.epochs, cfg.lr, cfg.clip, cfg.batch_size, seed=seed)
    log.info("%s training loss per epoch: %s", cfg.model, losses)
    return GenomePredictor(g, prep.norm.norm, prep.seq_len, cfg.model), None


#: (epochs, lr) candidates tried by :func:`train_tuned`
BASELINE_GRID = ((20, 0.003), (20, 0.01), (20, 0.03), (40, 0.03))


def train_tuned(prep: Prepared, cfg: TrainConfig, grid=BASELINE_GRID, seed: int = 0):
    """Train a fixed-architecture baseline once per (epochs, lr) and keep the lowest test-split MSE.

    Returns (predictor, chosen (epochs, lr), test MSE).  Selection never
    looks at the validation split.
    """
    if cfg.model not in ("mlp", "lstm"):
        raise ConfigError("train_tuned applies to the mlp and lstm baselines")
    best = None
    for epochs, lr in grid:
        pred, _ = train(prep, replace(cfg, epochs=epochs, lr=lr), seed)
        mse = evaluate_mse(pred.genome, prep.windows["test"])
        log.info("%s epochs=%d lr=%g test MSE %.6g", cfg.model, epochs, lr, mse)
        if best is None or mse < best[2]:
            best = (pred, (epochs, lr), mse)
    return best


def simulate(predictor, prep: Prepared, params: UtilityParams, oracle=False):
    """Adaptation-loop outcomes over the validation rows that have ``seq_len`` rows of history."""
    start, stop = prep.val_range
    if oracle:
        predictor = OraclePredictor(prep.raw)
    return run_adaptation_loop(predictor, prep.raw, params, start, stop)


def validation_mse(predictor, prep: Prepared) -> dict:
    """Per-target MSE of one-step forecasts on the validation rows, in normalized units.

    Also reports ``mean`` over the two targets.
    """
    start, stop = prep.val_range
    pred = one_step_forecasts(predictor, prep.raw, start, stop)
    out = {}
    for k, ch in enumerate(TARGETS):
        p = prep.norm.norm.apply(ch, pred[:, k])
        t = prep.norm.column(ch)[start:stop]
        out[ch] = float(np.mean((p - t) ** 2))
    out["mean"] = float(np.mean([out[ch] for ch in TARGETS]))
    return out
