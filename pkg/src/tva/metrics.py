"""Prediction-error and decision-quality metrics, plus the evaluation report."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .decision import utility_gain_loss
from .errors import InvalidInputError, SchemaError

DEFAULT_MAPE_EPSILON = 1e-9
REPORT_FORMAT = "tva-eval-report"


@dataclass(frozen=True)
class RegressionMetrics:
    mse: float
    mae: float
    #: percent; None when every truth value was below the epsilon guard
    mape: float | None
    n: int
    mape_excluded: int = 0


def regression_metrics(pred, truth, mape_epsilon=DEFAULT_MAPE_EPSILON) -> RegressionMetrics:
    """MSE, MAE and MAPE (in percent).

    Pairs with ``|truth| < mape_epsilon`` are left out of MAPE only; how
    many were left out is reported in ``mape_excluded``.
    """
    p = np.asarray(pred, dtype=float).reshape(-1)
    t = np.asarray(truth, dtype=float).reshape(-1)
    if p.size != t.size:
        raise InvalidInputError(f"length mismatch: {p.size} predictions vs {t.size} truths")
    if t.size == 0:
        raise InvalidInputError("need at least one prediction")
    err = t - p
    keep = np.abs(t) >= mape_epsilon
    mape = float(np.mean(np.abs(err[keep] / t[keep])) * 100.0) if keep.any() else None
    return RegressionMetrics(float(np.mean(err ** 2)), float(np.mean(np.abs(err))), mape,
                             int(t.size), int((~keep).sum()))


@dataclass(frozen=True)
class DecisionMetrics:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    fpr: float
    fnr: float
    u_gain: float
    u_loss: float
    # zero-denominator markers for fpr / fnr
    fpr_undefined: bool = False
    fnr_undefined: bool = False
    # textbook rates for cross-checking: FP/(FP+TN) and FN/(FN+TP)
    fpr_standard: float = 0.0
    fnr_standard: float = 0.0


def _ratio(num, den):
    return (num / den, False) if den else (0.0, True)


def decision_metrics(outcomes) -> DecisionMetrics:
    """Confusion counts, accuracy and error rates over decision outcomes.

    ``fpr`` is FP / (TP + FP), the share of Update decisions that were
    wrong, and ``fnr`` is FN / (FN + TN), the share of Pass decisions that
    were wrong.  Zero denominators give 0 with the matching ``*_undefined``
    flag set.
    """
    outcomes = list(outcomes)
    if not outcomes:
        raise InvalidInputError("need at least one outcome")
    c = {k: 0 for k in ("TP", "FP", "TN", "FN")}
    for o in outcomes:
        c[o.tag] += 1
    tp, fp, tn, fn = c["TP"], c["FP"], c["TN"], c["FN"]
    fpr, fpr_u = _ratio(fp, tp + fp)
    fnr, fnr_u = _ratio(fn, fn + tn)
    gain, loss = utility_gain_loss(outcomes)
    return DecisionMetrics(tp, fp, tn, fn, (tp + tn) / len(outcomes), fpr, fnr, gain, loss, fpr_u, fnr_u,
                           _ratio(fp, fp + tn)[0], _ratio(fn, fn + tp)[0])


def utility_mape(outcomes, mape_epsilon=DEFAULT_MAPE_EPSILON):
    """MAPE of predicted vs true utility over steps with a usable prediction."""
    pairs = [(o.predicted_utility, o.true_utility) for o in outcomes if math.isfinite(o.predicted_utility)]
    if not pairs:
        return None
    p, t = zip(*pairs)
    return regression_metrics(p, t, mape_epsilon).mape


def evaluate_outcomes(outcomes, mape_epsilon=DEFAULT_MAPE_EPSILON) -> dict:
    """One report entry: latency/cost regression metrics, utility MAPE and decisions."""
    outcomes = list(outcomes)
    entry = {}
    usable = [o for o in outcomes if math.isfinite(o.predicted_latency) and math.isfinite(o.predicted_cost)]
    for ch, pk, tk in (("latency", "predicted_latency", "true_latency"), ("cost", "predicted_cost", "true_cost")):
        if usable:
            entry[ch] = asdict(regression_metrics([getattr(o, pk) for o in usable],
                                                  [getattr(o, tk) for o in usable], mape_epsilon))
    entry["utility_mape"] = utility_mape(outcomes, mape_epsilon)
    entry["decisions"] = asdict(decision_metrics(outcomes)) if outcomes else {}
    entry["steps"] = len(outcomes)
    entry["flagged"] = sum(1 for o in outcomes if o.flagged)
    return entry


def _flatten(entry, prefix=""):
    out = {}
    for k, v in entry.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, (int, float)) and not isinstance(v, bool) and v is not None:
            out[key] = float(v)
    return out


def _unflatten(flat):
    out = {}
    for key, v in flat.items():
        d = out
        *head, last = key.split(".")
        for h in head:
            d = d.setdefault(h, {})
        d[last] = v
    return out


def average_over_sources(sources: dict) -> dict:
    """Arithmetic mean of every numeric metric, per model, over the sources that report it.

    ``sources`` maps source -> model -> report entry.  Metrics missing from
    some sources are averaged over the rest and listed under ``notes``.
    """
    models = sorted({m for per in sources.values() for m in per})
    out = {}
    for m in models:
        entries = {s: _flatten(per[m]) for s, per in sources.items() if m in per}
        keys = sorted({k for e in entries.values() for k in e})
        means, notes = {}, []
        for k in keys:
            vals = [e[k] for e in entries.values() if k in e]
            means[k] = float(np.mean(vals))
            missing = sorted(s for s, e in entries.items() if k not in e)
            if missing:
                notes.append(f"{k}: excluded from {', '.join(missing)}")
        avg = _unflatten(means)
        avg["sources"] = sorted(entries)
        if notes:
            avg["notes"] = notes
        out[m] = avg
    return out


@dataclass
class EvalReport:
    sources: dict = field(default_factory=dict)
    overbar: dict = field(default_factory=dict)

    def to_dict(self):
        return {"format": REPORT_FORMAT, "sources": self.sources, "overbar": self.overbar}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        if d.get("format") != REPORT_FORMAT or not isinstance(d.get("sources"), dict):
            raise SchemaError("not a tva evaluation report")
        return cls(d["sources"], d.get("overbar", {}))


def build_report(results: dict, mape_epsilon=DEFAULT_MAPE_EPSILON) -> EvalReport:
    """``results`` maps source -> model -> list of DecisionOutcome."""
    sources = {s: {m: evaluate_outcomes(outs, mape_epsilon) for m, outs in per.items()}
               for s, per in results.items()}
    return EvalReport(sources, average_over_sources(sources))
