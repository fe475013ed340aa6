"""Graph-structured recurrent networks: genomes, cells, forward pass and BPTT."""

from .genome import (
    CELL_KINDS,
    MEMORY_KINDS,
    NODE_KINDS,
    PARAM_COUNT,
    EdgeGene,
    NodeGene,
    RnnGenome,
    build_genome,
    compile_genome,
    count_params,
    dumps,
    genome_from_dict,
    genome_to_dict,
    loads,
    new_node,
)
from .train import bptt_train, evaluate_mse, forward, forward_batch, loss_and_grad

__all__ = [
    "CELL_KINDS", "MEMORY_KINDS", "NODE_KINDS", "PARAM_COUNT", "EdgeGene", "NodeGene", "RnnGenome",
    "build_genome", "compile_genome", "count_params", "dumps", "genome_from_dict", "genome_to_dict",
    "loads", "new_node", "bptt_train", "evaluate_mse", "forward", "forward_batch", "loss_and_grad",
]
