"""Structural variation operators: seed genome, mutations and crossover.

Node and edge ids act as innovation numbers.  Callers that mix genomes
(crossover) must draw new ids from one shared :class:`Innovations` counter so
that equal ids always denote the same structural gene.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidPairError
from ..rnn.genome import CELL_KINDS, EdgeGene, RnnGenome, build_genome, new_node

OPERATORS = ("add_edge", "add_recurrent_edge", "enable_edge", "disable_edge", "split_edge",
             "add_node", "split_node", "merge_node", "clone")

WEIGHT_SD = 0.1


@dataclass
class Innovations:
    next_node: int
    next_edge: int

    @classmethod
    def after(cls, *genomes: RnnGenome) -> "Innovations":
        return cls(max(g.max_node_id() for g in genomes) + 1, max(g.max_edge_id() for g in genomes) + 1)

    def node(self):
        self.next_node += 1
        return self.next_node - 1

    def edge(self):
        self.next_edge += 1
        return self.next_edge - 1


def seed_genome(input_channels, output_channels, rng=None) -> RnnGenome:
    """Minimal seed: every input wired straight to every output, no hidden nodes.

    Weights are Gaussian(0, 0.1^2) when ``rng`` is given, else zero.
    """
    g, in_ids, out_ids = build_genome(input_channels, output_channels)
    eid = 0
    for o in out_ids:
        for i in in_ids:
            w = float(rng.normal(0.0, WEIGHT_SD)) if rng is not None else 0.0
            g.edges.append(EdgeGene(eid, i, o, w))
            eid += 1
    return g


def _w(rng):
    return float(rng.normal(0.0, WEIGHT_SD))


def _pick(rng, items):
    return items[int(rng.integers(len(items)))]


def _hidden_depth(rng, lo=0.0, hi=1.0):
    d = lo
    while not lo < d < hi:
        d = float(rng.uniform(lo, hi))
    return d


# each operator edits ``g`` in place and returns False when inapplicable

def _add_edge(g, rng, cfg, inn):
    nodes = g.nodes
    existing = {(e.src, e.dst) for e in g.edges if e.recurrent_depth == 0}
    cands = [(s.node_id, d.node_id) for d in nodes if d.kind != "input"
             for s in nodes if s.depth < d.depth and (s.node_id, d.node_id) not in existing]
    if not cands:
        return False
    s, d = _pick(rng, cands)
    g.edges.append(EdgeGene(inn.edge(), s, d, _w(rng)))
    return True


def _add_recurrent_edge(g, rng, cfg, inn):
    existing = {(e.src, e.dst, e.recurrent_depth) for e in g.edges}
    dsts = [n.node_id for n in g.nodes if n.kind != "input"]
    srcs = [n.node_id for n in g.nodes]
    for _ in range(32):
        s, d = _pick(rng, srcs), _pick(rng, dsts)
        k = int(rng.integers(1, cfg.max_recurrent_depth + 1))
        if (s, d, k) not in existing:
            g.edges.append(EdgeGene(inn.edge(), s, d, _w(rng), True, k))
            return True
    return False


def _enable_edge(g, rng, cfg, inn):
    nodes = g.node_map()
    cands = [e for e in g.edges if not e.enabled
             and (e.recurrent_depth > 0 or nodes[e.src].depth < nodes[e.dst].depth)]
    if not cands:
        return False
    _pick(rng, cands).enabled = True
    return True


def _disable_edge(g, rng, cfg, inn):
    cands = g.enabled_edges()
    if not cands:
        return False
    _pick(rng, cands).enabled = False
    return True


def _split_edge(g, rng, cfg, inn):
    cands = g.enabled_edges()
    if not cands:
        return False
    e = _pick(rng, cands)
    nodes = g.node_map()
    src, dst = nodes[e.src], nodes[e.dst]
    if e.recurrent_depth == 0:
        depth = (src.depth + dst.depth) / 2.0
    else:
        depth = _hidden_depth(rng, 0.0, dst.depth)
    if not 0.0 < depth < 1.0 or depth >= dst.depth:
        return False
    n = new_node(inn.node(), _pick(rng, cfg.cell_kinds_enabled), depth, rng)
    e.enabled = False
    g.nodes.append(n)
    # incoming edge keeps the old weight and lag, outgoing starts at 1
    g.edges.append(EdgeGene(inn.edge(), e.src, n.node_id, e.weight, True, e.recurrent_depth))
    g.edges.append(EdgeGene(inn.edge(), n.node_id, e.dst, 1.0, True, 0))
    return True


def _add_node(g, rng, cfg, inn):
    depth = _hidden_depth(rng)
    srcs = [n.node_id for n in g.nodes if n.depth < depth]
    dsts = [n.node_id for n in g.nodes if n.depth > depth and n.kind != "input"]
    if not srcs or not dsts:
        return False
    n = new_node(inn.node(), _pick(rng, cfg.cell_kinds_enabled), depth, rng)
    g.nodes.append(n)
    for s in rng.choice(srcs, size=min(len(srcs), int(rng.integers(1, 3))), replace=False):
        g.edges.append(EdgeGene(inn.edge(), int(s), n.node_id, _w(rng)))
    for d in rng.choice(dsts, size=min(len(dsts), int(rng.integers(1, 3))), replace=False):
        g.edges.append(EdgeGene(inn.edge(), n.node_id, int(d), _w(rng)))
    if rng.random() < 0.5:
        s = _pick(rng, [m.node_id for m in g.nodes])
        g.edges.append(EdgeGene(inn.edge(), s, n.node_id, _w(rng), True,
                                int(rng.integers(1, cfg.max_recurrent_depth + 1))))
    return True


def _split_node(g, rng, cfg, inn):
    """Duplicate a hidden node; its incoming edges are partitioned between the two copies."""
    def incoming(nid):
        return [e for e in g.edges if e.enabled and e.dst == nid and e.src != nid]

    cands = [n for n in g.hidden() if len(incoming(n.node_id)) >= 2]
    if not cands:
        return False
    old = _pick(rng, cands)
    twin = old.copy()
    twin.node_id = inn.node()
    g.nodes.append(twin)
    ins = incoming(old.node_id)
    perm = rng.permutation(len(ins))
    cut = int(rng.integers(1, len(ins)))
    moved = {ins[i].edge_id for i in perm[cut:]}
    new_edges = []
    for e in g.edges:
        if not e.enabled:
            continue
        if e.edge_id in moved:
            new_edges.append(EdgeGene(inn.edge(), e.src, twin.node_id, e.weight, True, e.recurrent_depth))
        elif e.src == old.node_id and e.dst == old.node_id:
            new_edges.append(EdgeGene(inn.edge(), twin.node_id, twin.node_id, e.weight, True, e.recurrent_depth))
        elif e.src == old.node_id:
            new_edges.append(EdgeGene(inn.edge(), twin.node_id, e.dst, e.weight, True, e.recurrent_depth))
    g.edges = [e for e in g.edges if e.edge_id not in moved] + new_edges
    return True


def _merge_node(g, rng, cfg, inn):
    """Fuse two hidden nodes into one, summing parallel incident edges."""
    hidden = g.hidden()
    if len(hidden) < 2:
        return False
    nodes = g.node_map()
    pairs = [(a, b) for a in hidden for b in hidden if a.node_id != b.node_id]
    for k in rng.permutation(len(pairs)):
        a, b = pairs[k]
        ab = {a.node_id, b.node_id}
        inc = [e for e in g.edges if e.enabled and (e.src in ab or e.dst in ab)]
        lo = max([nodes[e.src].depth for e in inc if e.recurrent_depth == 0 and e.dst in ab and e.src not in ab],
                 default=0.0)
        hi = min([nodes[e.dst].depth for e in inc if e.recurrent_depth == 0 and e.src in ab and e.dst not in ab],
                 default=1.0)
        if not lo < hi:
            continue
        m = a.copy()
        m.node_id = inn.node()
        m.depth = (lo + hi) / 2.0
        merged = {}
        for e in inc:
            s = m.node_id if e.src in ab else e.src
            d = m.node_id if e.dst in ab else e.dst
            if s == d and e.recurrent_depth == 0:
                continue
            key = (s, d, e.recurrent_depth)
            merged[key] = merged.get(key, 0.0) + e.weight
        g.nodes = [n for n in g.nodes if n.node_id not in ab] + [m]
        g.edges = [e for e in g.edges if e.src not in ab and e.dst not in ab]
        for (s, d, k_), w in merged.items():
            g.edges.append(EdgeGene(inn.edge(), s, d, w, True, k_))
        return True
    return False


_IMPL = {
    "add_edge": _add_edge,
    "add_recurrent_edge": _add_recurrent_edge,
    "enable_edge": _enable_edge,
    "disable_edge": _disable_edge,
    "split_edge": _split_edge,
    "add_node": _add_node,
    "split_node": _split_node,
    "merge_node": _merge_node,
    "clone": lambda g, rng, cfg, inn: True,
}


class _MutationDefaults:
    op_weights = {op: 1.0 for op in OPERATORS}
    cell_kinds_enabled = CELL_KINDS
    max_recurrent_depth = 10


def mutate_with_op(g: RnnGenome, rng, cfg=None, innovations: Innovations | None = None):
    """Apply one operator drawn by ``cfg.op_weights``; returns (child, operator name).

    Inapplicable operators fall through to the next one in a weighted
    draw without replacement; ``clone`` is the final fallback.
    """
    cfg = cfg or _MutationDefaults
    inn = innovations or Innovations.after(g)
    ops = [op for op in OPERATORS if cfg.op_weights.get(op, 0.0) > 0]
    p = np.array([cfg.op_weights[op] for op in ops], dtype=float)
    order = rng.choice(len(ops), size=len(ops), replace=False, p=p / p.sum())
    child = g.copy()
    child.fitness = None
    for k in order:
        trial = child.copy()
        if _IMPL[ops[k]](trial, rng, cfg, inn):
            return trial, ops[k]
    return child, "clone"


def mutate(g: RnnGenome, rng, cfg=None, innovations: Innovations | None = None) -> RnnGenome:
    return mutate_with_op(g, rng, cfg, innovations)[0]


def _fitness_key(g):
    return np.inf if g.fitness is None else g.fitness


def crossover(a: RnnGenome, b: RnnGenome, rng) -> RnnGenome:
    """Lamarckian crossover: the child reuses parental weights verbatim.

    Matching genes come from the fitter parent (ties favour ``a``); the
    fitter parent's disjoint genes are always inherited and the other
    parent's with probability 0.5.
    """
    if a.input_channels != b.input_channels or a.output_channels != b.output_channels:
        raise InvalidPairError("parents have different channel signatures")
    fit, other = (a, b) if _fitness_key(a) <= _fitness_key(b) else (b, a)
    fit_edges = {e.edge_id: e for e in fit.edges}
    edges = [e.copy() for e in fit.edges]
    for e in other.edges:
        if e.edge_id not in fit_edges and rng.random() < 0.5:
            edges.append(e.copy())
    fit_nodes = fit.node_map()
    other_nodes = other.node_map()
    nodes = [n.copy() for n in fit.nodes]
    have = set(fit_nodes)
    for e in edges:
        for nid in (e.src, e.dst):
            if nid not in have:
                nodes.append(other_nodes[nid].copy())
                have.add(nid)
    child = RnnGenome(nodes, edges, fit.input_channels, fit.output_channels)
    # guard against id collisions between unrelated lineages
    nm = child.node_map()
    child.edges = [e for e in child.edges
                   if not (e.enabled and e.recurrent_depth == 0 and not nm[e.src].depth < nm[e.dst].depth)]
    return child
