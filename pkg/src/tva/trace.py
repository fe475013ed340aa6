"""Tactic traces: records, CSV I/O, chronological splits, scaling and windows.

A :class:`TraceDataset` is column-oriented (one numpy array per channel) and
immutable after construction.  All transforms return new datasets.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    AlignmentError,
    DegenerateChannelError,
    InvalidInputError,
    ParseError,
    SchemaError,
    TooSmallError,
)

#: Numeric channels in canonical CSV order.
CHANNELS = ("latency", "cost", "urt_ping", "urt_available")
URT_CHANNELS = ("urt_ping", "urt_available")
#: Channels that are already 0/1 flags and are never rescaled.
FLAG_CHANNELS = ("urt_available",)
SPLITS = ("train", "test", "val")
DEFAULT_SEQ_LEN = 16


@dataclass(frozen=True)
class TacticRecord:
    seq_index: int
    tactic_source: str
    latency: float
    cost: float
    urt_ping: float | None = None
    urt_available: int | None = None
    # set by the live probe when the operation timed out or was refused
    flagged: bool = False


@dataclass(frozen=True)
class NormParams:
    """Per-channel min/max fitted on the training split."""

    mins: Mapping[str, float]
    maxs: Mapping[str, float]

    def apply(self, channel, values):
        lo, hi = self.mins[channel], self.maxs[channel]
        return (np.asarray(values, dtype=float) - lo) / (hi - lo)

    def inverse(self, channel, values):
        lo, hi = self.mins[channel], self.maxs[channel]
        return np.asarray(values, dtype=float) * (hi - lo) + lo

    def to_dict(self):
        return {ch: [self.mins[ch], self.maxs[ch]] for ch in self.mins}

    @classmethod
    def from_dict(cls, d):
        return cls({k: float(v[0]) for k, v in d.items()},
                   {k: float(v[1]) for k, v in d.items()})


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TraceDataset:
    """Ordered multichannel trace of one tactic source.

    ``columns`` maps channel name to a 1-D float array; ``split`` holds
    ``(train, test, val)`` counts once :func:`split_chronological` ran.
    """

    seq_index: np.ndarray
    columns: Mapping[str, np.ndarray]
    tactic_source: str = "default"
    split: tuple[int, int, int] | None = None
    norm: NormParams | None = None

    def __post_init__(self):
        idx = _frozen(self.seq_index, dtype=np.int64)
        object.__setattr__(self, "seq_index", idx)
        cols = {}
        for ch in CHANNELS:
            if ch in self.columns:
                col = _frozen(self.columns[ch])
                if col.shape != idx.shape:
                    raise SchemaError(f"channel {ch!r} has {col.size} values, expected {idx.size}")
                cols[ch] = col
        unknown = set(self.columns) - set(CHANNELS)
        if unknown:
            raise SchemaError(f"unknown channels: {sorted(unknown)}")
        object.__setattr__(self, "columns", cols)
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise SchemaError("seq_index must be strictly increasing")
        if self.split is not None:
            if len(self.split) != 3 or sum(self.split) != idx.size or min(self.split) < 0:
                raise SchemaError(f"split {self.split} does not partition {idx.size} records")
            object.__setattr__(self, "split", tuple(int(s) for s in self.split))
        if self.norm is None:
            self._check_raw_ranges()

    def _check_raw_ranges(self):
        c = self.columns
        if "latency" in c and np.any(~(c["latency"] > 0)):
            raise SchemaError("latency must be > 0")
        if "cost" in c and np.any(~((c["cost"] >= 0) & (c["cost"] <= 1))):
            raise SchemaError("cost must lie in [0, 1]")
        if "urt_ping" in c and np.any(~(c["urt_ping"] >= 0)):
            raise SchemaError("urt_ping must be >= 0")
        if "urt_available" in c and not np.all(np.isin(c["urt_available"], (0.0, 1.0))):
            raise SchemaError("urt_available must be 0 or 1")

    def __len__(self):
        return int(self.seq_index.size)

    @property
    def channels(self) -> list[str]:
        return list(self.columns)

    def column(self, name):
        try:
            return self.columns[name]
        except KeyError:
            raise SchemaError(f"channel {name!r} not present (have {self.channels})") from None

    def matrix(self, channels: Sequence[str]) -> np.ndarray:
        """Stack the requested channels into an (n, len(channels)) array."""
        return np.column_stack([self.column(ch) for ch in channels]) if len(self) else np.zeros((0, len(channels)))

    def raw(self, name):
        """Channel values in raw units, undoing normalization if applied."""
        col = self.column(name)
        return self.norm.inverse(name, col) if self.norm is not None else col

    @property
    def records(self) -> list[TacticRecord]:
        out = []
        for i in range(len(self)):
            kw = {ch: float(self.columns[ch][i]) for ch in ("latency", "cost", "urt_ping") if ch in self.columns}
            if "urt_available" in self.columns:
                kw["urt_available"] = int(self.columns["urt_available"][i])
            out.append(TacticRecord(int(self.seq_index[i]), self.tactic_source, **kw))
        return out

    def split_bounds(self) -> dict[str, tuple[int, int]]:
        if self.split is None:
            raise InvalidInputError("dataset has no split; call split_chronological first")
        a, b, _ = self.split
        n = len(self)
        return {"train": (0, a), "test": (a, a + b), "val": (a + b, n)}

    def subset(self, start, stop) -> "TraceDataset":
        """Rows ``start:stop`` as a new dataset (split dropped, norm kept)."""
        return TraceDataset(self.seq_index[start:stop],
                            {ch: col[start:stop] for ch, col in self.columns.items()},
                            self.tactic_source, None, self.norm)

    def split_part(self, name) -> "TraceDataset":
        return self.subset(*self.split_bounds()[name])


def from_records(records: Iterable[TacticRecord]) -> TraceDataset:
    records = list(records)
    if not records:
        raise TooSmallError("no records")
    sources = {r.tactic_source for r in records}
    if len(sources) > 1:
        raise SchemaError(f"one tactic_source per dataset, got {sorted(sources)}")
    cols = {"latency": [r.latency for r in records], "cost": [r.cost for r in records]}
    for ch in URT_CHANNELS:
        vals = [getattr(r, ch) for r in records]
        if any(v is not None for v in vals):
            if any(v is None for v in vals):
                raise SchemaError(f"channel {ch} missing on some records")
            cols[ch] = vals
    return TraceDataset([r.seq_index for r in records], cols, records[0].tactic_source)


# -- CSV ------------------------------------------------------------------

def parse_trace(csv_text: str, require: Sequence[str] = ("latency", "cost")) -> TraceDataset:
    """Parse the trace CSV format.

    ``seq_index`` and ``tactic_source`` columns are optional; without
    ``seq_index`` records are numbered 0.. in file order.  Row numbers in
    errors count the header as row 1.
    """
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError("empty trace: no header row") from None
    known = {"seq_index", "tactic_source", *CHANNELS}
    unknown = [h for h in header if h not in known]
    if unknown:
        raise SchemaError(f"unknown columns {unknown}")
    if len(set(header)) != len(header):
        raise SchemaError("duplicate column in header")
    missing = [c for c in require if c not in header]
    if missing:
        raise SchemaError(f"missing mandatory column(s) {missing}")

    pos = {h: i for i, h in enumerate(header)}
    channels = [ch for ch in CHANNELS if ch in pos]
    seq, sources, cols = [], set(), {ch: [] for ch in channels}
    for rowno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", rowno)
        for ch in channels:
            cell = row[pos[ch]].strip()
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{ch}={cell!r} is not a number", rowno) from None
            if not math.isfinite(v):
                raise ParseError(f"{ch}={cell!r} is not finite", rowno)
            cols[ch].append(v)
        if "seq_index" in pos:
            cell = row[pos["seq_index"]].strip()
            try:
                seq.append(int(cell))
            except ValueError:
                raise ParseError(f"seq_index={cell!r} is not an integer", rowno) from None
        if "tactic_source" in pos:
            sources.add(row[pos["tactic_source"]].strip())
    n = len(cols[channels[0]]) if channels else len(seq)
    if len(sources) > 1:
        raise SchemaError(f"one tactic_source per dataset, got {sorted(sources)}")
    if "seq_index" not in pos:
        seq = list(range(n))
    source = sources.pop() if sources else "default"
    return TraceDataset(np.asarray(seq, dtype=np.int64), cols, source)


def _fmt(v):
    return repr(float(v))


def format_trace(ds: TraceDataset, header=True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(["seq_index", "tactic_source", *ds.channels])
    for i in range(len(ds)):
        row = [int(ds.seq_index[i]), ds.tactic_source]
        for ch in ds.channels:
            v = ds.raw(ch)[i]
            row.append(str(int(v)) if ch in FLAG_CHANNELS else _fmt(v))
        w.writerow(row)
    return buf.getvalue()


def read_trace(path, **kw) -> TraceDataset:
    return parse_trace(Path(path).read_text(encoding="utf-8"), **kw)


def write_trace(ds: TraceDataset, path) -> None:
    Path(path).write_text(format_trace(ds), encoding="utf-8")


# -- transforms -----------------------------------------------------------

def split_chronological(ds: TraceDataset, fractions=(0.7, 0.15, 0.15), counts=None) -> TraceDataset:
    """Set contiguous train/test/val boundaries.

    Test and validation sizes are ``round(n * f)`` (at least one record
    each); the remainder goes to training.  Pass ``counts`` to pin exact
    boundaries instead.
    """
    n = len(ds)
    if n < 3:
        raise TooSmallError(f"need at least 3 records to split, got {n}")
    if counts is not None:
        counts = tuple(int(c) for c in counts)
        if len(counts) != 3 or min(counts) < 1 or sum(counts) != n:
            raise InvalidInputError(f"counts {counts} must be three positive integers summing to {n}")
        return replace(ds, split=counts)
    if len(fractions) != 3 or min(fractions) <= 0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise InvalidInputError(f"fractions {fractions} must be positive and sum to 1")
    test = max(1, math.floor(n * fractions[1] + 0.5))
    val = max(1, math.floor(n * fractions[2] + 0.5))
    train = n - test - val
    if train < 1:
        raise TooSmallError(f"{n} records leave no training data")
    return replace(ds, split=(train, test, val))


def normalize_fit_apply(ds: TraceDataset) -> TraceDataset:
    """Min-max scale every channel using training-split statistics only."""
    if ds.split is None:
        raise InvalidInputError("normalize_fit_apply needs a split dataset")
    if ds.norm is not None:
        raise InvalidInputError("dataset is already normalized")
    lo_i, hi_i = ds.split_bounds()["train"]
    mins, maxs, cols = {}, {}, {}
    for ch, col in ds.columns.items():
        if ch in FLAG_CHANNELS:
            mins[ch], maxs[ch] = 0.0, 1.0
        else:
            tr = col[lo_i:hi_i]
            mins[ch], maxs[ch] = float(tr.min()), float(tr.max())
            if not maxs[ch] > mins[ch]:
                raise DegenerateChannelError(f"channel {ch!r} is constant ({mins[ch]}) on the training split")
    norm = NormParams(mins, maxs)
    for ch, col in ds.columns.items():
        cols[ch] = norm.apply(ch, col)
    return replace(ds, columns=cols, norm=norm)


def denormalize(ds: TraceDataset) -> TraceDataset:
    if ds.norm is None:
        return ds
    return replace(ds, columns={ch: ds.norm.inverse(ch, c) for ch, c in ds.columns.items()}, norm=None)


def downsample(ds: TraceDataset, n: int) -> TraceDataset:
    """Keep every ``n``-th record (indices 0, n, 2n, ...), renumbered gap-free."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidInputError(f"downsample rate must be a positive integer, got {n!r}")
    keep = np.arange(0, len(ds), n)
    split = None
    if ds.split is not None:
        bounds = ds.split_bounds()
        split = tuple(int(np.sum((keep >= lo) & (keep < hi))) for lo, hi in bounds.values())
    cols = {ch: col[keep] for ch, col in ds.columns.items()}
    return TraceDataset(np.arange(keep.size), cols, ds.tactic_source, split, ds.norm)


def merge_urt(ds: TraceDataset, urt: TraceDataset) -> TraceDataset:
    """Attach URT channels from ``urt`` to ``ds`` by seq_index.

    Indices without a URT observation carry the last observed value
    forward; indices before the first observation take the first value.
    """
    if urt.tactic_source != ds.tactic_source:
        raise AlignmentError(f"tactic_source mismatch: {ds.tactic_source!r} vs {urt.tactic_source!r}")
    if ds.norm is not None or urt.norm is not None:
        raise InvalidInputError("merge URT channels before normalizing")
    present = [ch for ch in URT_CHANNELS if ch in urt.columns]
    if not present:
        raise SchemaError("URT dataset carries neither urt_ping nor urt_available")
    clash = [ch for ch in present if ch in ds.columns]
    if clash:
        raise SchemaError(f"dataset already has URT channel(s) {clash}")
    # position of the last URT observation at or before each ds index
    pos = np.searchsorted(urt.seq_index, ds.seq_index, side="right") - 1
    if not np.isin(ds.seq_index, urt.seq_index).any():
        raise AlignmentError("trace and URT series share no seq_index values")
    pos = np.clip(pos, 0, None)
    cols = dict(ds.columns)
    for ch in present:
        cols[ch] = urt.columns[ch][pos]
    return TraceDataset(ds.seq_index, cols, ds.tactic_source, ds.split, None)


@dataclass(frozen=True)
class WindowSet:
    """Teacher-forced one-step-ahead windows.

    ``inputs`` is (windows, seq_len, n_in); ``targets`` is
    (windows, seq_len, n_out) and holds each target channel one step ahead
    of the matching input row.
    """

    input_channels: tuple[str, ...]
    target_channels: tuple[str, ...]
    inputs: np.ndarray
    targets: np.ndarray
    # dataset row of each window's first input step
    starts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        for name in ("inputs", "targets"):
            a = np.ascontiguousarray(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.inputs.ndim != 3 or self.targets.ndim != 3 or self.inputs.shape[:2] != self.targets.shape[:2]:
            raise InvalidInputError(f"misaligned window arrays {self.inputs.shape} / {self.targets.shape}")
        if self.inputs.shape[2] != len(self.input_channels) or self.targets.shape[2] != len(self.target_channels):
            raise InvalidInputError("window vector width does not match channel lists")

    def __len__(self):
        return self.inputs.shape[0]

    @property
    def seq_len(self):
        return self.inputs.shape[1]

    @property
    def sequences(self):
        return list(zip(self.inputs, self.targets))

    def take(self, idx) -> "WindowSet":
        idx = np.asarray(idx)
        starts = self.starts[idx] if self.starts.size else self.starts
        return WindowSet(self.input_channels, self.target_channels, self.inputs[idx], self.targets[idx], starts)


def windows_from_matrix(x: np.ndarray, y: np.ndarray, seq_len: int, stride: int = 1):
    """Slide over aligned arrays: window k covers x[s:s+L] and y[s+1:s+L+1]."""
    n = x.shape[0]
    starts = np.arange(0, n - seq_len, stride)
    rows = starts[:, None] + np.arange(seq_len)[None, :]
    return x[rows], y[rows + 1], starts


def make_windows(ds: TraceDataset, input_channels: Sequence[str], target_channels: Sequence[str],
                 seq_len: int = DEFAULT_SEQ_LEN, stride: int = 1) -> dict[str, WindowSet]:
    """Build sliding windows independently for each split.

    ``stride`` > 1 thins the windows (useful to cut training cost); the
    default of 1 yields ``len(split) - seq_len`` windows per split.
    """
    if seq_len < 2:
        raise InvalidInputError(f"seq_len must be >= 2, got {seq_len}")
    if stride < 1:
        raise InvalidInputError(f"stride must be >= 1, got {stride}")
    if ds.norm is None:
        raise InvalidInputError("make_windows expects a normalized dataset")
    input_channels, target_channels = tuple(input_channels), tuple(target_channels)
    for ch in (*input_channels, *target_channels):
        ds.column(ch)
    out = {}
    for name, (lo, hi) in ds.split_bounds().items():
        if hi - lo < seq_len + 1:
            raise TooSmallError(f"{name} split has {hi - lo} records, need at least {seq_len + 1}")
        x = ds.matrix(input_channels)[lo:hi]
        y = ds.matrix(target_channels)[lo:hi]
        xi, yi, starts = windows_from_matrix(x, y, seq_len, stride)
        out[name] = WindowSet(input_channels, target_channels, xi, yi, starts + lo)
    return out
