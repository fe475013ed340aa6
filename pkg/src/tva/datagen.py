"""Tactic trace sources: a seeded synthetic generator and a live HTTP probe."""

from __future__ import annotations

import csv
import logging
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .trace import TacticRecord, TraceDataset

log = logging.getLogger(__name__)

URT_MODES = ("none", "informative", "pure_noise")
#: URT ping is this fraction of the next step's latency in informative mode.
URT_COUPLING = 0.8

_LEVELS = (0.12, 0.085, 0.11, 0.095, 0.125, 0.09, 0.115, 0.08, 0.105, 0.10)


def default_regimes(length=10_000, every=500):
    """Cost regime shifts every ``every`` records cycling through levels about one jitter sd apart."""
    return [(k * every, _LEVELS[(k - 1) % len(_LEVELS)]) for k in range(1, -(-length // every))]


@dataclass
class SynthConfig:
    """Parameters of the synthetic tactic trace.

    ``latency_noise_sd`` is the stationary standard deviation of the AR(1)
    component (innovations are scaled by sqrt(1 - ar^2)).  Before the first
    entry of ``cost_regimes`` the cost level is ``cost_base``.
    """

    length: int = 10_000
    latency_base: float = 0.05
    latency_ar: float = 0.7
    latency_noise_sd: float = 0.008
    spike_prob: float = 0.01
    spike_scale: float = 5.0
    cost_base: float = 0.10
    cost_regimes: list = field(default_factory=default_regimes)
    cost_noise_sd: float = 0.02
    urt_mode: str = "none"
    urt_noise_sd: float = 0.004
    seed: int = 0
    tactic_source: str = "synthetic"

    def __post_init__(self):
        self.cost_regimes = [(int(s), float(v)) for s, v in self.cost_regimes]
        if self.length < 1:
            raise ConfigError("length must be >= 1")
        if not -1 < self.latency_ar < 1:
            raise ConfigError("latency_ar must lie in (-1, 1)")
        if not 0 <= self.spike_prob < 1:
            raise ConfigError("spike_prob must lie in [0, 1)")
        if self.spike_prob > 0 and not self.spike_scale > 1:
            raise ConfigError("spike_scale must be > 1")
        if not self.latency_base > 0:
            raise ConfigError("latency_base must be > 0")
        if min(self.latency_noise_sd, self.cost_noise_sd, self.urt_noise_sd) < 0:
            raise ConfigError("noise standard deviations must be >= 0")
        if not 0 <= self.cost_base <= 1 or any(not 0 <= v <= 1 for _, v in self.cost_regimes):
            raise ConfigError("cost levels must lie in [0, 1]")
        if self.urt_mode not in URT_MODES:
            raise ConfigError(f"urt_mode must be one of {URT_MODES}")

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def synth_trace(cfg: SynthConfig) -> TraceDataset:
    """Generate a trace; a pure function of ``cfg`` (including its seed)."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.length
    # one extra step so the informative URT can look one step ahead
    m = n + 1
    innov = rng.normal(0.0, cfg.latency_noise_sd * np.sqrt(1.0 - cfg.latency_ar ** 2), m)
    z = np.empty(m)
    z[0] = rng.normal(0.0, cfg.latency_noise_sd)
    for t in range(1, m):
        z[t] = cfg.latency_ar * z[t - 1] + innov[t]
    spikes = rng.random(m) < cfg.spike_prob
    latency = cfg.latency_base + z
    latency = np.where(spikes, latency * cfg.spike_scale, latency)
    latency = np.maximum(latency, 1e-6)

    level = np.full(n, cfg.cost_base)
    for start, value in sorted(cfg.cost_regimes):
        level[max(start, 0):] = value
    cost = np.clip(level + rng.normal(0.0, cfg.cost_noise_sd, n), 0.0, 1.0)

    cols = {"latency": latency[:n], "cost": cost}
    if cfg.urt_mode == "informative":
        cols["urt_ping"] = np.maximum(URT_COUPLING * latency[1:] + rng.normal(0.0, cfg.urt_noise_sd, n), 0.0)
    elif cfg.urt_mode == "pure_noise":
        cols["urt_ping"] = np.maximum(URT_COUPLING * cfg.latency_base + rng.normal(0.0, cfg.urt_noise_sd, n), 0.0)
    return TraceDataset(np.arange(n), cols, cfg.tactic_source)


# -- live probing ---------------------------------------------------------

@dataclass
class ProbeConfig:
    target_url: str
    interval: float = 60.0
    count: int = 1
    ping_target: str = ""
    timeout: float = 30.0
    tactic_source: str = "live"

    def __post_init__(self):
        if not self.interval > 0:
            raise ConfigError("interval must be > 0")
        if self.count < 1:
            raise ConfigError("count must be >= 1")
        if not self.timeout > 0:
            raise ConfigError("timeout must be > 0")
        if not self.target_url:
            raise ConfigError("target_url is required")

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def _as_url(target):
    return target if "://" in target else f"http://{target}/"


def _ping(target, timeout):
    """Round-trip time of one lightweight GET, or None on failure."""
    t0 = time.perf_counter()
    try:
        req = urllib.request.Request(_as_url(target), headers={"Range": "bytes=0-0"})
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            resp.read(1)
    except (OSError, urllib.error.URLError, ValueError):
        return None
    return time.perf_counter() - t0


def probe_once(cfg: ProbeConfig, seq_index: int = 0) -> TacticRecord:
    """Execute the download tactic once and measure latency, CPU cost and URT ping.

    Cost is the process CPU time consumed during the download divided by its
    wall time, i.e. the mean CPU fraction, clipped to [0, 1].
    """
    wall0, cpu0 = time.perf_counter(), time.process_time()
    ok = True
    try:
        with urllib.request.urlopen(cfg.target_url, timeout=cfg.timeout) as resp:
            while resp.read(1 << 16):
                pass
    except (OSError, urllib.error.URLError, ValueError) as exc:
        log.warning("download from %s failed: %s", cfg.target_url, exc)
        ok = False
    wall = time.perf_counter() - wall0
    cpu = time.process_time() - cpu0
    cost = min(max(cpu / wall, 0.0), 1.0) if wall > 0 else 0.0
    latency = max(wall, 1e-9) if ok else cfg.timeout

    rtt = _ping(cfg.ping_target or cfg.target_url, cfg.timeout)
    available = ok and rtt is not None
    return TacticRecord(seq_index, cfg.tactic_source, latency, cost,
                        urt_ping=rtt if rtt is not None else cfg.timeout,
                        urt_available=int(available), flagged=not ok)


CSV_HEADER = ["seq_index", "tactic_source", "latency", "cost", "urt_ping", "urt_available"]


def _next_index(sink: Path) -> int:
    if not sink.exists() or sink.stat().st_size == 0:
        return 0
    with sink.open(newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    return int(rows[-1][0]) + 1 if len(rows) > 1 else 0


def run_collection(cfg: ProbeConfig, sink, probe=probe_once) -> int:
    """Append ``cfg.count`` probe records to ``sink``, starting one every ``cfg.interval`` seconds.

    Each row is flushed and fsynced before the next probe, so an interrupt
    leaves only complete rows.  Returns the number of rows written.
    """
    sink = Path(sink)
    idx = _next_index(sink)
    new_file = not sink.exists() or sink.stat().st_size == 0
    written = 0
    with sink.open("a", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        if new_file:
            w.writerow(CSV_HEADER)
            f.flush()
        t_next = time.monotonic()
        for k in range(cfg.count):
            if k:
                delay = t_next - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            t_next = time.monotonic() + cfg.interval
            r = probe(cfg, idx)
            w.writerow([r.seq_index, r.tactic_source, repr(r.latency), repr(r.cost),
                        repr(r.urt_ping), r.urt_available])
            f.flush()
            os.fsync(f.fileno())
            idx += 1
            written += 1
    return written


__all__ = ["SynthConfig", "synth_trace", "ProbeConfig", "probe_once", "run_collection", "URT_MODES"]
