"""``tva`` command line: synth, collect, train, simulate, evaluate.

Every subcommand reads an optional JSON config with the sections ``seed``,
``synth``, ``probe``, ``prepare``, ``train``, ``decide``, ``evaluate`` and
``paths``.  ``--set section.key=value`` overrides single keys (the value is
parsed as JSON when it can be, otherwise kept as a string), dedicated flags
override ``paths``, and ``TVA_SEED`` overrides the config seed.

Exit status: 0 on success, 2 for usage, config or input-file problems, 1 for
failures while running.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, trace
from .datagen import ProbeConfig, SynthConfig, run_collection, synth_trace
from .decision import UtilityParams, format_outcomes, parse_outcomes
from .errors import ConfigError, TraceError, TvaError
from .metrics import DEFAULT_MAPE_EPSILON, build_report
from .pipeline import PrepareConfig, TrainConfig, prepare, simulate, train
from .predictors import GenomePredictor, model_from_json, model_to_json

log = logging.getLogger("tva")

SECTIONS = ("synth", "probe", "prepare", "train", "decide", "evaluate", "paths")
STOCHASTIC_MODELS = ("ernn", "mlp", "lstm")


class UsageError(Exception):
    """Bad invocation or unusable input; maps to exit status 2."""


# -- config ---------------------------------------------------------------

def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path, overrides=()) -> dict:
    cfg = {}
    if path:
        try:
            cfg = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise UsageError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
    unknown = sorted(set(cfg) - set(SECTIONS) - {"seed"})
    if unknown:
        raise UsageError(f"unknown config sections: {', '.join(unknown)}")
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects section.key=value, got {item!r}")
        if key == "seed":
            cfg["seed"] = _parse_value(value)
            continue
        section, dot, name = key.partition(".")
        if not dot or section not in SECTIONS:
            raise UsageError(f"--set key must be seed or <section>.<key>, got {key!r}")
        d = cfg.setdefault(section, {})
        *head, last = name.split(".")
        for h in head:
            d = d.setdefault(h, {})
        d[last] = _parse_value(value)
    return cfg


def resolve_seed(cfg, flag=None):
    """Seed precedence: ``--seed`` flag, then ``TVA_SEED``, then the config."""
    if flag is not None:
        return flag
    env = os.environ.get("TVA_SEED")
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"TVA_SEED must be an integer, got {env!r}") from None
    seed = cfg.get("seed")
    if seed is not None and not isinstance(seed, int):
        raise UsageError(f"seed must be an integer, got {seed!r}")
    return seed


def _path(cfg, args, attr, key, must_exist=False):
    value = getattr(args, attr, None) or cfg.get("paths", {}).get(key)
    if not value:
        raise UsageError(f"missing --{attr.replace('_', '-')} (or paths.{key} in the config)")
    p = Path(value)
    if must_exist and not p.is_file():
        raise UsageError(f"{key} file not found: {p}")
    return p


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _prepare_cfg(cfg):
    d = dict(cfg.get("prepare", {}))
    for k in ("split_fractions", "split_counts"):
        if d.get(k) is not None:
            d[k] = tuple(d[k])
    return PrepareConfig.from_dict(d)


def _load_prepared(cfg, args, pcfg=None):
    pcfg = pcfg or _prepare_cfg(cfg)
    ds = trace.read_trace(_path(cfg, args, "trace", "trace", must_exist=True))
    urt = None
    if pcfg.urt_path:
        if not Path(pcfg.urt_path).is_file():
            raise UsageError(f"urt file not found: {pcfg.urt_path}")
        urt = trace.read_trace(pcfg.urt_path, require=())
    return prepare(ds, pcfg, urt)


# -- subcommands ----------------------------------------------------------

def cmd_synth(cfg, args):
    d = dict(cfg.get("synth", {}))
    seed = resolve_seed(cfg, args.seed)
    if seed is not None:
        d["seed"] = seed
    if "cost_regimes" in d:
        d["cost_regimes"] = tuple(tuple(r) for r in d["cost_regimes"])
    ds = synth_trace(SynthConfig.from_dict(d))
    out = _path(cfg, args, "out", "trace")
    _write(out, trace.format_trace(ds))
    log.info("wrote %d records to %s", len(ds), out)


def cmd_collect(cfg, args):
    pcfg = ProbeConfig.from_dict(cfg.get("probe", {}))
    out = _path(cfg, args, "out", "trace")
    out.parent.mkdir(parents=True, exist_ok=True)
    n = run_collection(pcfg, out)
    log.info("appended %d records to %s", n, out)


def cmd_train(cfg, args):
    tcfg = TrainConfig.from_dict(cfg.get("train", {}))
    seed = resolve_seed(cfg, args.seed)
    if seed is None:
        if tcfg.model in STOCHASTIC_MODELS:
            raise UsageError(f"model {tcfg.model} needs a seed (config 'seed', TVA_SEED or --seed)")
        seed = 0
    out = _path(cfg, args, "model_out", "model")
    prep = _load_prepared(cfg, args)
    predictor, slog = train(prep, tcfg, seed)
    _write(out, model_to_json(predictor))
    log.info("wrote %s model to %s", tcfg.model, out)
    if slog is not None:
        slog_path = out.with_name(out.name + ".searchlog.csv")
        _write(slog_path, slog.to_csv())
        log.info("wrote search log (%d evaluations) to %s", len(slog.entries), slog_path)


def cmd_simulate(cfg, args):
    try:
        params = UtilityParams(**cfg.get("decide", {}))
    except TypeError as exc:
        raise UsageError(f"decide: {exc}") from None
    outcomes_path = _path(cfg, args, "outcomes", "outcomes")
    pcfg = _prepare_cfg(cfg)
    if args.oracle:
        predictor, model = None, "oracle"
    else:
        model_path = _path(cfg, args, "model_in", "model", must_exist=True)
        try:
            predictor = model_from_json(model_path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise UsageError(f"model file {model_path} is malformed: {exc}") from None
        model = predictor.kind
        if isinstance(predictor, GenomePredictor) and predictor.seq_len != pcfg.seq_len:
            log.info("using the model's seq_len %d", predictor.seq_len)
            pcfg.seq_len = predictor.seq_len
    prep = _load_prepared(cfg, args, pcfg)
    outcomes = simulate(predictor, prep, params, oracle=args.oracle)
    meta = {"source": prep.raw.tactic_source, "model": model, "threshold": repr(params.threshold),
            "reward": repr(params.reward), "seq_len": prep.seq_len}
    _write(outcomes_path, format_outcomes(outcomes, meta))
    log.info("wrote %d outcomes to %s", len(outcomes), outcomes_path)


def cmd_evaluate(cfg, args):
    paths = args.outcomes or cfg.get("paths", {}).get("outcomes")
    if not paths:
        raise UsageError("evaluate needs at least one outcomes file")
    if isinstance(paths, str):
        paths = [paths]
    eps = float(cfg.get("evaluate", {}).get("mape_epsilon", DEFAULT_MAPE_EPSILON))
    results = {}
    for p in map(Path, paths):
        if not p.is_file():
            raise UsageError(f"outcomes file not found: {p}")
        meta, outs = parse_outcomes(p.read_text(encoding="utf-8"))
        if not outs:
            raise UsageError(f"{p} holds no outcomes")
        source, model = meta.get("source", p.stem), meta.get("model", "model")
        per = results.setdefault(source, {})
        if model in per:
            raise UsageError(f"two outcome files for source {source!r}, model {model!r}")
        per[model] = outs
    out = _path(cfg, args, "report", "report")
    _write(out, build_report(results, eps).to_json())
    log.info("wrote report for %d source(s) to %s", len(results), out)


COMMANDS = {"synth": cmd_synth, "collect": cmd_collect, "train": cmd_train,
            "simulate": cmd_simulate, "evaluate": cmd_evaluate}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("--seed", type=int, help="global seed; beats TVA_SEED and the config")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="tva", description="Tactic volatility awareness toolkit")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic trace")
    p.add_argument("--out", help="trace CSV to write")
    p = sub.add_parser("collect", parents=[common], help="append live probe records to a trace")
    p.add_argument("--out", help="trace CSV to append to")
    p = sub.add_parser("train", parents=[common], help="train a predictor on a trace")
    p.add_argument("--trace")
    p.add_argument("--model-out")
    p = sub.add_parser("simulate", parents=[common], help="run the adaptation loop over the validation split")
    p.add_argument("--trace")
    p.add_argument("--model-in")
    p.add_argument("--outcomes", help="outcomes CSV to write")
    p.add_argument("--oracle", action="store_true", help="predict with the observed values")
    p = sub.add_parser("evaluate", parents=[common], help="score outcome files into a report")
    p.add_argument("outcomes", nargs="*", help="outcomes CSV files")
    p.add_argument("--report", help="report JSON to write")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, args.set)
        COMMANDS[args.command](cfg, args)
    except KeyboardInterrupt:
        print("tva: interrupted; rows written so far are complete", file=sys.stderr)
        return 1
    except (UsageError, ConfigError, TraceError) as exc:
        print(f"tva {args.command}: {exc}", file=sys.stderr)
        return 2
    except (TvaError, OSError, ArithmeticError, ValueError) as exc:
        print(f"tva {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
