"""Utility models and the per-cycle adaptation decision loop."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .errors import ConfigError, ParseError, SchemaError, UtilityDomainError
from .trace import TraceDataset

log = logging.getLogger(__name__)

UPDATE, PASS = "Update", "Pass"
#: utilities this close (relative) to the threshold count as ties; 150 / (0.015 + 0.135)
#: evaluates to 999.9999999999999 in binary floating point
TIE_RTOL = 1e-12
TAGS = ("TP", "FP", "TN", "FN")
OUTCOME_COLUMNS = ("step", "pred_latency", "pred_cost", "true_latency", "true_cost",
                   "pred_U", "true_U", "pred_decision", "true_decision", "tag")


@dataclass(frozen=True)
class UtilityParams:
    reward: float = 150.0
    threshold: float = 1000.0

    def __post_init__(self):
        if not self.reward > 0:
            raise ConfigError("reward must be > 0")


@dataclass(frozen=True)
class SlaParams:
    tau: float
    a: float
    r: float
    k: float
    d: float
    R_O: float
    R_M: float
    C: float
    T: float

    def __post_init__(self):
        if not 0 <= self.d <= 1:
            raise ConfigError("dimmer d must lie in [0, 1]")


def utility(p: UtilityParams, latency, cost) -> float:
    """reward / (latency + cost)."""
    denom = latency + cost
    if not denom > 0:
        raise UtilityDomainError(f"latency + cost must be > 0, got {denom!r}")
    return p.reward / denom


def sla_utility(s: SlaParams) -> float:
    """Response-time SLA utility of one interval, penalised when r exceeds the target T."""
    if not s.C > 0:
        raise UtilityDomainError("cost C must be > 0")
    if s.r <= s.T:
        return s.tau * s.a * (s.d * s.R_O + (1 - s.d) * s.R_M) / s.C
    return s.tau * min(0.0, s.a - s.k) * s.R_O / s.C


def decide(u: float, p: UtilityParams) -> str:
    """Update when ``u`` reaches the threshold (ties, up to rounding, included)."""
    return UPDATE if u >= p.threshold - TIE_RTOL * abs(p.threshold) else PASS


def tag_of(predicted: str, truth: str) -> str:
    if predicted == UPDATE:
        return "TP" if truth == UPDATE else "FP"
    return "FN" if truth == UPDATE else "TN"


@dataclass(frozen=True)
class DecisionOutcome:
    step: int
    predicted_latency: float
    predicted_cost: float
    true_latency: float
    true_cost: float
    predicted_utility: float
    true_utility: float
    predicted_decision: str
    true_decision: str
    tag: str
    # predictor failed or produced a utility-domain error; decision forced to Pass
    flagged: bool = False


class Predictor(Protocol):
    def predict(self, history: np.ndarray, channels: Sequence[str]) -> tuple[float, float]:
        """Forecast (latency, cost) for the next cycle from raw-unit history rows."""


def run_adaptation_loop(predictor, ds: TraceDataset, p: UtilityParams, start: int = 0, stop: int | None = None):
    """Step the adaptation loop over rows ``start:stop`` of ``ds``.

    At each step t the predictor sees the observed rows ``[0, t)`` (raw
    units, columns ``ds.channels``), its forecast is turned into a utility
    and a threshold decision, and the decision is scored against the one
    the observed row t implies.  Observations always enter the history
    (teacher forcing), URT channels included.
    """
    stop = len(ds) if stop is None else stop
    channels = ds.channels
    hist = np.column_stack([ds.raw(ch) for ch in channels])
    lat, cost = ds.raw("latency"), ds.raw("cost")
    out = []
    for t in range(start, stop):
        true_u = utility(p, lat[t], cost[t])
        truth = decide(true_u, p)
        flagged = False
        pl = pc = math.nan
        try:
            pl, pc = (float(v) for v in predictor.predict(hist[:t], channels))
            pred_u = utility(p, pl, pc)
            if not math.isfinite(pred_u):
                raise UtilityDomainError("non-finite predicted utility")
            pred = decide(pred_u, p)
        except Exception as exc:  # noqa: BLE001 - any predictor failure forces a Pass
            log.debug("step %d: forced Pass (%s)", t, exc)
            pred_u, pred, flagged = math.nan, PASS, True
        out.append(DecisionOutcome(int(ds.seq_index[t]), pl, pc, float(lat[t]), float(cost[t]),
                                   pred_u, true_u, pred, truth, tag_of(pred, truth), flagged))
    return out


def utility_gain_loss(outcomes) -> tuple[float, float]:
    """(sum of true utility over TP, sum of true utility over FN)."""
    gain = sum(o.true_utility for o in outcomes if o.tag == "TP")
    loss = sum(o.true_utility for o in outcomes if o.tag == "FN")
    return float(gain), float(loss)


# -- outcome CSV ----------------------------------------------------------

def _num(v):
    return repr(float(v))


def format_outcomes(outcomes, meta: dict | None = None) -> str:
    """Outcome rows as CSV, preceded by ``# key=value`` comment lines from ``meta``."""
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(OUTCOME_COLUMNS)
    for o in outcomes:
        w.writerow([o.step, _num(o.predicted_latency), _num(o.predicted_cost), _num(o.true_latency),
                    _num(o.true_cost), _num(o.predicted_utility), _num(o.true_utility),
                    o.predicted_decision, o.true_decision, o.tag])
    return buf.getvalue()


def parse_outcomes(text: str):
    """Inverse of :func:`format_outcomes`; returns (meta, outcomes)."""
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            k, sep, v = line[1:].strip().partition("=")
            if sep:
                meta[k.strip()] = v.strip()
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    if not rows or tuple(h.strip() for h in rows[0]) != OUTCOME_COLUMNS:
        raise SchemaError(f"outcomes header must be {','.join(OUTCOME_COLUMNS)}")
    out = []
    for rowno, r in enumerate(rows[1:], start=2):
        if len(r) != len(OUTCOME_COLUMNS):
            raise ParseError(f"expected {len(OUTCOME_COLUMNS)} fields, got {len(r)}", rowno)
        try:
            step = int(r[0])
            nums = [float(v) for v in r[1:7]]
        except ValueError as exc:
            raise ParseError(str(exc), rowno) from None
        pred, truth, tag = (v.strip() for v in r[7:10])
        if pred not in (UPDATE, PASS) or truth not in (UPDATE, PASS) or tag != tag_of(pred, truth):
            raise ParseError(f"inconsistent decision fields {pred},{truth},{tag}", rowno)
        out.append(DecisionOutcome(step, *nums, pred, truth, tag, flagged=math.isnan(nums[4])))
    return meta, out
