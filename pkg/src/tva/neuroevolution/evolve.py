"""Steady-state island evolution of RNN genomes with BPTT local search."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConfigError, DivergedTrainingError
from ..rnn import bptt_train, count_params, evaluate_mse
from ..rnn.genome import CELL_KINDS, RnnGenome
from ..trace import WindowSet
from .operators import OPERATORS, Innovations, crossover, mutate_with_op, seed_genome

log = logging.getLogger(__name__)

SEARCHLOG_COLUMNS = ("eval", "genome_id", "parent_ids", "op", "fitness", "nodes", "weights")


@dataclass
class EvolveConfig:
    islands: int = 4
    island_capacity: int = 10
    max_evaluations: int = 1000
    mutation_rate: float = 0.7
    crossover_rate: float = 0.3
    op_weights: dict = field(default_factory=lambda: {op: 1.0 for op in OPERATORS})
    migration_period: int = 100
    bptt_epochs: int = 10
    bptt_lr: float = 0.001
    bptt_clip: float = 1.0
    bptt_batch_size: int = 1
    seed: int = 0
    cell_kinds_enabled: tuple = CELL_KINDS
    max_recurrent_depth: int = 10
    workers: int = 1

    def __post_init__(self):
        self.cell_kinds_enabled = tuple(self.cell_kinds_enabled)
        self.op_weights = dict(self.op_weights)
        if self.islands < 1 or self.island_capacity < 1 or self.max_evaluations < 1:
            raise ConfigError("islands, island_capacity and max_evaluations must be >= 1")
        if min(self.mutation_rate, self.crossover_rate) < 0 or abs(self.mutation_rate + self.crossover_rate - 1) > 1e-9:
            raise ConfigError("mutation_rate and crossover_rate must be non-negative and sum to 1")
        unknown = set(self.op_weights) - set(OPERATORS)
        if unknown:
            raise ConfigError(f"unknown mutation operators {sorted(unknown)}")
        if any(w < 0 for w in self.op_weights.values()) or sum(self.op_weights.values()) <= 0:
            raise ConfigError("operator weights must be non-negative with a positive sum")
        bad = set(self.cell_kinds_enabled) - set(CELL_KINDS)
        if bad or not self.cell_kinds_enabled:
            raise ConfigError(f"cell_kinds_enabled must be a non-empty subset of {CELL_KINDS}")
        if self.max_recurrent_depth < 1:
            raise ConfigError("max_recurrent_depth must be >= 1")
        if self.migration_period < 1 or self.workers < 1 or self.bptt_epochs < 1 or not self.bptt_lr > 0:
            raise ConfigError("migration_period, workers, bptt_epochs must be >= 1 and bptt_lr > 0")

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class LogEntry:
    eval: int
    genome_id: int
    parent_ids: tuple
    op: str
    fitness: float
    nodes: int
    weights: int
    island: int
    inserted: bool


@dataclass
class SearchLog:
    entries: list = field(default_factory=list)
    # (after eval, genome_id, destination island)
    migrations: list = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def best_so_far(self):
        best, out = math.inf, []
        for e in self.entries:
            if e.inserted or e.op == "seed":
                best = min(best, e.fitness)
            out.append(best)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SEARCHLOG_COLUMNS)
        for e in self.entries:
            w.writerow([e.eval, e.genome_id, ";".join(str(p) for p in e.parent_ids), e.op,
                        repr(float(e.fitness)), e.nodes, e.weights])
        return buf.getvalue()


ROOT_ISLAND = -1


class _Island:
    def __init__(self, capacity):
        self.capacity = capacity
        self.members: list[RnnGenome] = []

    def try_insert(self, g) -> bool:
        if not math.isfinite(g.fitness):
            return False
        if any(m.generation_id == g.generation_id for m in self.members):
            return False
        if len(self.members) < self.capacity:
            self.members.append(g)
        elif g.fitness < self.members[-1].fitness:
            self.members[-1] = g
        else:
            return False
        self.members.sort(key=lambda m: (m.fitness, m.generation_id))
        return True


def train_and_score(g: RnnGenome, train: WindowSet, test: WindowSet, cfg: EvolveConfig, shuffle_seed):
    """BPTT-train a copy of ``g`` and set its fitness to the test-split MSE (inf on divergence)."""
    try:
        trained, _ = bptt_train(g, train, epochs=cfg.bptt_epochs, lr=cfg.bptt_lr, clip=cfg.bptt_clip,
                                batch_size=cfg.bptt_batch_size, seed=shuffle_seed)
        fit = evaluate_mse(trained, test)
        if not math.isfinite(fit):
            raise DivergedTrainingError("non-finite test MSE")
    except DivergedTrainingError:
        trained, fit = g.copy(), math.inf
    trained.fitness = fit
    trained.generation_id = g.generation_id
    return trained


def evolve(cfg: EvolveConfig, train: WindowSet, test: WindowSet, seed: RnnGenome | None = None):
    """Run the island search; returns (best genome, SearchLog).

    With ``cfg.workers == 1`` the run is a pure function of (cfg, data).
    More workers train children on a thread pool; insertion order then
    follows completion order and is not reproducible.
    """
    rng = np.random.default_rng(cfg.seed)
    if seed is None:
        seed = seed_genome(train.input_channels, train.target_channels, rng)
    seed = seed.copy()
    seed.generation_id = 0
    inn = Innovations.after(seed)
    slog = SearchLog()
    islands = [_Island(cfg.island_capacity) for _ in range(cfg.islands)]

    root = train_and_score(seed, train, test, cfg, int(rng.integers(2**63)))
    best = root
    n_, w_ = count_params(root)
    slog.entries.append(LogEntry(1, 0, (), "seed", root.fitness, n_, w_, ROOT_ISLAND, True))
    log.info("eval 1 seed fitness %.6g", root.fitness)
    next_id = 1

    def make_child():
        nonlocal next_id
        i = int(rng.integers(cfg.islands))
        pool = islands[i].members
        if not pool:
            parents, (child, op) = (root,), mutate_with_op(root, rng, cfg, inn)
        elif len(pool) >= 2 and rng.random() < cfg.crossover_rate:
            a, b = rng.choice(len(pool), size=2, replace=False)
            parents = (pool[a], pool[b])
            child, op = crossover(pool[a], pool[b], rng), "crossover"
        else:
            p = pool[int(rng.integers(len(pool)))]
            parents, (child, op) = (p,), mutate_with_op(p, rng, cfg, inn)
        child.generation_id = next_id
        next_id += 1
        return child, i, tuple(p.generation_id for p in parents), op, int(rng.integers(2**63))

    def record(trained, island, parent_ids, op):
        nonlocal best
        inserted = islands[island].try_insert(trained)
        n, w = count_params(trained)
        k = len(slog.entries) + 1
        slog.entries.append(LogEntry(k, trained.generation_id, parent_ids, op, trained.fitness, n, w, island, inserted))
        if trained.fitness < best.fitness:
            best = trained
            log.info("eval %d new best %.6g (%d nodes, %d weights, %s)", k, best.fitness, n, w, op)
        if k % cfg.migration_period == 0 and cfg.islands > 1:
            for j, isl in enumerate(islands):
                if isl.try_insert(best):
                    slog.migrations.append((k, best.generation_id, j))

    remaining = cfg.max_evaluations - 1
    if cfg.workers == 1:
        for _ in range(remaining):
            child, island, pids, op, s = make_child()
            record(train_and_score(child, train, test, cfg, s), island, pids, op)
    else:
        with ThreadPoolExecutor(cfg.workers) as ex:
            pending = {}
            submitted = 0
            while submitted < remaining or pending:
                while submitted < remaining and len(pending) < cfg.workers:
                    child, island, pids, op, s = make_child()
                    pending[ex.submit(train_and_score, child, train, test, cfg, s)] = (island, pids, op)
                    submitted += 1
                done, _ = wait(pending, return_when=FIRST_COMPLETED)
                for fut in sorted(done, key=lambda f: f.result().generation_id):
                    island, pids, op = pending.pop(fut)
                    record(fut.result(), island, pids, op)
    return best.copy(), slog
