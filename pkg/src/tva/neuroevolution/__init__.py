"""EXAMM-style neuroevolution of recurrent networks."""

from .evolve import SEARCHLOG_COLUMNS, EvolveConfig, LogEntry, SearchLog, evolve, train_and_score
from .operators import OPERATORS, Innovations, crossover, mutate, mutate_with_op, seed_genome

__all__ = [
    "SEARCHLOG_COLUMNS", "EvolveConfig", "LogEntry", "SearchLog", "evolve", "train_and_score",
    "OPERATORS", "Innovations", "crossover", "mutate", "mutate_with_op", "seed_genome",
]
