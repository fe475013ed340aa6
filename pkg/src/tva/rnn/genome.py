"""Genome data model for graph-structured recurrent networks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from ..errors import InvalidGenomeError
from . import kernels

NODE_KINDS = ("input", "output", "simple", "lstm", "gru", "mgu", "ugrnn", "delta_rnn")
CELL_KINDS = ("simple", "lstm", "gru", "mgu", "ugrnn", "delta_rnn")
MEMORY_KINDS = ("lstm", "gru", "mgu", "ugrnn", "delta_rnn")
KIND_CODE = {k: i for i, k in enumerate(NODE_KINDS)}
PARAM_COUNT = {"input": 0, "output": 0, "simple": 1, "lstm": 12, "gru": 9, "mgu": 6, "ugrnn": 6, "delta_rnn": 6}

FORMAT_VERSION = 1


@dataclass
class NodeGene:
    node_id: int
    kind: str
    depth: float
    cell_params: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.cell_params = np.array(self.cell_params, dtype=float).reshape(-1)

    def copy(self):
        return NodeGene(self.node_id, self.kind, self.depth, self.cell_params.copy())


@dataclass
class EdgeGene:
    edge_id: int
    src: int
    dst: int
    weight: float
    enabled: bool = True
    recurrent_depth: int = 0

    def copy(self):
        return EdgeGene(self.edge_id, self.src, self.dst, self.weight, self.enabled, self.recurrent_depth)


@dataclass
class RnnGenome:
    nodes: list[NodeGene]
    edges: list[EdgeGene]
    input_channels: tuple[str, ...]
    output_channels: tuple[str, ...]
    fitness: float | None = None
    generation_id: int = 0

    def __post_init__(self):
        self.input_channels = tuple(self.input_channels)
        self.output_channels = tuple(self.output_channels)

    def copy(self) -> "RnnGenome":
        return RnnGenome([n.copy() for n in self.nodes], [e.copy() for e in self.edges],
                         self.input_channels, self.output_channels, self.fitness, self.generation_id)

    def node_map(self) -> dict[int, NodeGene]:
        return {n.node_id: n for n in self.nodes}

    def inputs(self):
        return [n for n in self.nodes if n.kind == "input"]

    def outputs(self):
        return [n for n in self.nodes if n.kind == "output"]

    def hidden(self):
        return [n for n in self.nodes if n.kind not in ("input", "output")]

    def enabled_edges(self):
        return [e for e in self.edges if e.enabled]

    def max_node_id(self):
        return max((n.node_id for n in self.nodes), default=-1)

    def max_edge_id(self):
        return max((e.edge_id for e in self.edges), default=-1)

    def validate(self) -> "RnnGenome":
        """Raise :class:`InvalidGenomeError` unless every structural invariant holds."""
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise InvalidGenomeError("duplicate node ids")
        eids = [e.edge_id for e in self.edges]
        if len(set(eids)) != len(eids):
            raise InvalidGenomeError("duplicate edge ids")
        nodes = self.node_map()
        for n in self.nodes:
            if n.kind not in NODE_KINDS:
                raise InvalidGenomeError(f"node {n.node_id}: unknown kind {n.kind!r}")
            if n.cell_params.size != PARAM_COUNT[n.kind]:
                raise InvalidGenomeError(
                    f"node {n.node_id} ({n.kind}) has {n.cell_params.size} cell params, expected {PARAM_COUNT[n.kind]}")
            if n.kind == "input" and n.depth != 0.0:
                raise InvalidGenomeError(f"input node {n.node_id} must have depth 0")
            if n.kind == "output" and n.depth != 1.0:
                raise InvalidGenomeError(f"output node {n.node_id} must have depth 1")
            if n.kind not in ("input", "output") and not 0.0 < n.depth < 1.0:
                raise InvalidGenomeError(f"hidden node {n.node_id} depth {n.depth} outside (0, 1)")
        if len(self.inputs()) != len(self.input_channels):
            raise InvalidGenomeError("input node count does not match input channels")
        if len(self.outputs()) != len(self.output_channels):
            raise InvalidGenomeError("output node count does not match output channels")
        for e in self.edges:
            if e.src not in nodes or e.dst not in nodes:
                raise InvalidGenomeError(f"edge {e.edge_id} references a missing node")
            if nodes[e.dst].kind == "input":
                raise InvalidGenomeError(f"edge {e.edge_id} feeds an input node")
            if e.recurrent_depth < 0:
                raise InvalidGenomeError(f"edge {e.edge_id} has negative recurrent depth")
            # strict depth ordering of feedforward edges makes the depth-0 graph acyclic
            if e.enabled and e.recurrent_depth == 0 and not nodes[e.src].depth < nodes[e.dst].depth:
                raise InvalidGenomeError(f"feedforward edge {e.edge_id} violates depth ordering")
            if not np.isfinite(e.weight):
                raise InvalidGenomeError(f"edge {e.edge_id} has non-finite weight")
        return self

    def is_valid(self) -> bool:
        try:
            self.validate()
        except InvalidGenomeError:
            return False
        return True


class Plan(NamedTuple):
    """A genome lowered to arrays for the compiled kernels."""

    kind: np.ndarray
    poff: np.ndarray
    in_ptr: np.ndarray
    in_src: np.ndarray
    in_depth: np.ndarray
    in_w: np.ndarray
    inp_col: np.ndarray
    out_pos: np.ndarray
    node_ids: list
    edge_ids: list
    n_weights: int

    def args(self):
        return (self.kind, self.poff, self.in_ptr, self.in_src, self.in_depth, self.in_w, self.inp_col)


def topo_order(g: RnnGenome) -> list[NodeGene]:
    # depth ties broken by id; ties never share a depth-0 edge
    return sorted(g.nodes, key=lambda n: (n.depth, n.node_id))


def compile_genome(g: RnnGenome) -> tuple[Plan, np.ndarray]:
    """Lower ``g`` to a :class:`Plan` and its flat parameter vector."""
    order = topo_order(g)
    pos = {n.node_id: i for i, n in enumerate(order)}
    N = len(order)
    inputs = [n for n in order if n.kind == "input"]
    outputs = [n for n in order if n.kind == "output"]
    # inputs/outputs bind to channels in node-id order
    inp_col = np.full(N, -1, dtype=np.int64)
    for ch_i, n in enumerate(sorted(inputs, key=lambda n: n.node_id)):
        inp_col[pos[n.node_id]] = ch_i
    out_pos = np.array([pos[n.node_id] for n in sorted(outputs, key=lambda n: n.node_id)], dtype=np.int64)

    enabled = [e for e in g.edges if e.enabled]
    enabled.sort(key=lambda e: (pos[e.dst], e.edge_id))
    E = len(enabled)
    in_ptr = np.zeros(N + 1, dtype=np.int64)
    for e in enabled:
        in_ptr[pos[e.dst] + 1] += 1
    in_ptr = np.cumsum(in_ptr)
    in_src = np.array([pos[e.src] for e in enabled], dtype=np.int64)
    in_depth = np.array([e.recurrent_depth for e in enabled], dtype=np.int64)
    in_w = np.arange(E, dtype=np.int64)

    kind = np.array([KIND_CODE[n.kind] for n in order], dtype=np.int64)
    poff = np.zeros(N, dtype=np.int64)
    theta = [np.array([e.weight for e in enabled], dtype=float)]
    off = E
    for i, n in enumerate(order):
        poff[i] = off
        theta.append(n.cell_params)
        off += n.cell_params.size
    plan = Plan(kind, poff, in_ptr, in_src, in_depth, in_w, inp_col, out_pos,
                [n.node_id for n in order], [e.edge_id for e in enabled], E)
    return plan, np.concatenate(theta)


def write_back(g: RnnGenome, plan: Plan, theta: np.ndarray) -> RnnGenome:
    """Return a copy of ``g`` carrying the parameters in ``theta``."""
    out = g.copy()
    edges = {e.edge_id: e for e in out.edges}
    for j, eid in enumerate(plan.edge_ids):
        edges[eid].weight = float(theta[j])
    nodes = out.node_map()
    for i, nid in enumerate(plan.node_ids):
        n = nodes[nid]
        k = n.cell_params.size
        n.cell_params = np.array(theta[plan.poff[i]:plan.poff[i] + k], dtype=float)
    return out


def count_params(g: RnnGenome) -> tuple[int, int]:
    """(node count, weight count); weights are enabled edges plus cell parameters."""
    weights = sum(1 for e in g.edges if e.enabled) + sum(n.cell_params.size for n in g.nodes if n.kind != "input")
    return len(g.nodes), weights


def new_node(node_id, kind, depth, rng=None, scale=0.1) -> NodeGene:
    """A node of ``kind`` with Gaussian(0, scale^2) cell parameters (LSTM forget bias 1)."""
    k = PARAM_COUNT[kind]
    p = rng.normal(0.0, scale, k) if (rng is not None and k) else np.zeros(k)
    if kind == "lstm":
        p[5] = 1.0
    return NodeGene(node_id, kind, float(depth), p)


# -- serialization --------------------------------------------------------

def genome_to_dict(g: RnnGenome) -> dict:
    return {
        "format": "tva-rnn-genome",
        "version": FORMAT_VERSION,
        "input_channels": list(g.input_channels),
        "output_channels": list(g.output_channels),
        "fitness": None if g.fitness is None else float(g.fitness),
        "generation_id": int(g.generation_id),
        "nodes": [{"id": n.node_id, "kind": n.kind, "depth": float(n.depth),
                   "params": [float(v) for v in n.cell_params]} for n in g.nodes],
        "edges": [{"id": e.edge_id, "src": e.src, "dst": e.dst, "weight": float(e.weight),
                   "enabled": bool(e.enabled), "recurrent_depth": int(e.recurrent_depth)} for e in g.edges],
    }


def genome_from_dict(d: dict) -> RnnGenome:
    if d.get("format") != "tva-rnn-genome":
        raise InvalidGenomeError("not a tva genome document")
    fit = d.get("fitness")
    g = RnnGenome(
        [NodeGene(int(n["id"]), n["kind"], float(n["depth"]), n["params"]) for n in d["nodes"]],
        [EdgeGene(int(e["id"]), int(e["src"]), int(e["dst"]), float(e["weight"]), bool(e["enabled"]),
                  int(e["recurrent_depth"])) for e in d["edges"]],
        d["input_channels"], d["output_channels"],
        None if fit is None else float(fit), int(d.get("generation_id", 0)))
    return g.validate()


def dumps(g: RnnGenome) -> str:
    return json.dumps(genome_to_dict(g), indent=1, sort_keys=True)


def loads(text: str) -> RnnGenome:
    return genome_from_dict(json.loads(text))


def build_genome(input_channels: Sequence[str], output_channels: Sequence[str]) -> tuple[RnnGenome, list, list]:
    """Empty genome holding only input/output nodes; returns (genome, input ids, output ids)."""
    nodes = []
    in_ids = list(range(len(input_channels)))
    out_ids = list(range(len(input_channels), len(input_channels) + len(output_channels)))
    nodes += [NodeGene(i, "input", 0.0) for i in in_ids]
    nodes += [NodeGene(i, "output", 1.0) for i in out_ids]
    return RnnGenome(nodes, [], input_channels, output_channels), in_ids, out_ids


__all__ = [
    "NODE_KINDS", "CELL_KINDS", "MEMORY_KINDS", "PARAM_COUNT", "NodeGene", "EdgeGene", "RnnGenome",
    "Plan", "compile_genome", "write_back", "count_params", "new_node", "genome_to_dict",
    "genome_from_dict", "dumps", "loads", "build_genome", "kernels",
]
