"""Attack patterns as labelled directed graphs.

A walk in the graph is an admissible sequence of attack actions; the label
of each traversed edge names the mode applied at that step.  Per-channel
patterns are combined with the Kronecker (synchronous) product.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDwell, InvalidGraph
from .model import NOMINAL, ChannelSelection

ATTACK = "A"
START = "s0"


def _flat(label) -> tuple:
    return label if isinstance(label, tuple) else (label,)


@dataclass(frozen=True)
class AttackGraph:
    nodes: tuple
    edges: tuple  # of (src, dst, label)

    def __init__(self, nodes, edges, check: bool = True):
        nodes = tuple(nodes)
        edges = tuple((s, d, lab) for s, d, lab in edges)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        if check:
            problems = validate(self)
            if problems:
                raise InvalidGraph("; ".join(problems))

    @property
    def labels(self) -> tuple:
        seen = []
        for _, _, lab in self.edges:
            if lab not in seen:
                seen.append(lab)
        return tuple(seen)

    def out_edges(self, node) -> list:
        return [(s, d, lab) for s, d, lab in self.edges if s == node]

    def in_edges(self, node) -> list:
        return [(s, d, lab) for s, d, lab in self.edges if d == node]

    def adjacency(self) -> np.ndarray:
        """Walk-counting matrix (entry = number of parallel edges)."""
        idx = {v: i for i, v in enumerate(self.nodes)}
        M = np.zeros((len(self.nodes), len(self.nodes)), dtype=np.int64)
        for s, d, _ in self.edges:
            M[idx[s], idx[d]] += 1
        return M

    def relabel(self, mapping) -> "AttackGraph":
        return AttackGraph(self.nodes, [(s, d, mapping[lab]) for s, d, lab in self.edges])

    def to_dict(self) -> dict:
        def enc(lab):
            return list(lab) if isinstance(lab, tuple) else lab
        return {"nodes": list(self.nodes),
                "edges": [[s, d, enc(lab)] for s, d, lab in self.edges]}

    @classmethod
    def from_dict(cls, d: dict) -> "AttackGraph":
        if "dwell" in d:
            dw = d["dwell"]
            return build_dwell_graph(int(dw["n_max"]), int(dw.get("n_min", 1)),
                                     dw.get("label", ATTACK))
        edges = []
        for e in d["edges"]:
            if len(e) != 3:
                raise InvalidGraph(f"edge {e!r} is not a [src, dst, label] triple")
            lab = tuple(e[2]) if isinstance(e[2], list) else e[2]
            edges.append((e[0], e[1], lab))
        return cls(d["nodes"], edges)


def validate(G: AttackGraph) -> list[str]:
    """List of violated graph invariants (empty when the graph is valid)."""
    problems = []
    if not G.nodes:
        problems.append("graph has no nodes")
    if len(set(G.nodes)) != len(G.nodes):
        problems.append("duplicate node ids")
    nodes = set(G.nodes)
    seen = set()
    outdeg = {v: 0 for v in G.nodes}
    for e in G.edges:
        s, d, _ = e
        if s not in nodes or d not in nodes:
            problems.append(f"edge {e!r} references an unknown node")
            continue
        if e in seen:
            problems.append(f"duplicate edge {e!r}")
        seen.add(e)
        outdeg[s] += 1
    for v in G.nodes:
        if outdeg[v] == 0:
            problems.append(f"node {v!r} has no outgoing edge")
    return problems


def kron_product(G1: AttackGraph, G2: AttackGraph) -> AttackGraph:
    """Synchronous product: both factors move at every step.

    Nodes are ``"p.q"`` strings and labels are flattened tuples.
    """
    nodes = [f"{p}.{q}" for p in G1.nodes for q in G2.nodes]
    edges = [(f"{s1}.{s2}", f"{d1}.{d2}", _flat(l1) + _flat(l2))
             for s1, d1, l1 in G1.edges for s2, d2, l2 in G2.edges]
    return AttackGraph(nodes, edges, check=False)


def build_dwell_graph(n_max: int, n_min: int = 1, attack_label=ATTACK,
                      nominal_label=NOMINAL) -> AttackGraph:
    """Graph of words whose attack runs last at most ``n_max`` steps and are
    separated by at least ``n_min`` attack-free steps.

    Nodes: ``s0`` (free to attack), ``a1..a{n_max}`` (attack counter) and
    ``r1..r{n_min-1}`` (recovery counter).
    """
    if isinstance(n_max, bool) or int(n_max) != n_max or n_max < 0:
        raise InvalidDwell(f"n_max must be a nonnegative integer, got {n_max!r}")
    if isinstance(n_min, bool) or int(n_min) != n_min or n_min < 1:
        raise InvalidDwell(f"n_min must be a positive integer, got {n_min!r}")
    N, A = nominal_label, attack_label
    if n_max == 0:
        return AttackGraph([START], [(START, START, N)])
    att = [f"a{k}" for k in range(1, n_max + 1)]
    rec = [f"r{k}" for k in range(1, n_min)]
    after_attack = rec[0] if rec else START
    edges = [(START, START, N), (START, att[0], A)]
    for k, a in enumerate(att):
        if k + 1 < n_max:
            edges.append((a, att[k + 1], A))
        edges.append((a, after_attack, N))
    for k, r in enumerate(rec):
        edges.append((r, rec[k + 1] if k + 1 < len(rec) else START, N))
    return AttackGraph([START] + att + rec, edges)


def dwell_predicate(word, n_max: int, n_min: int, attack_label=ATTACK) -> bool:
    """Run-length test for finite words: every attack run has length at most
    ``n_max`` and every attack-free gap between two attack runs has length at
    least ``n_min``."""
    runs = [(k, len(list(g))) for k, g in itertools.groupby(x == attack_label for x in word)]
    for i, (is_attack, length) in enumerate(runs):
        if is_attack and length > n_max:
            return False
        if not is_attack and 0 < i < len(runs) - 1 and length < n_min:
            return False
    return True


def enumerate_words(G: AttackGraph, length: int, start=None) -> list:
    """All walks with ``length`` edges from the given start nodes (default:
    every node) as ``(node_path, label_word)`` pairs."""
    if length < 0:
        raise ValueError("length must be nonnegative")
    start = G.nodes if start is None else tuple(start)
    out_map = {v: G.out_edges(v) for v in G.nodes}
    frontier = [((v,), ()) for v in start]
    for _ in range(length):
        frontier = [(path + (d,), word + (lab,))
                    for path, word in frontier for _, d, lab in out_map[path[-1]]]
    return frontier


def count_walks(G: AttackGraph, length: int, start=None) -> int:
    M = G.adjacency()
    idx = {v: i for i, v in enumerate(G.nodes)}
    rows = [idx[v] for v in (G.nodes if start is None else start)]
    P = np.linalg.matrix_power(M, length) if length else np.eye(len(G.nodes), dtype=np.int64)
    return int(P[rows].sum())


@dataclass(frozen=True)
class ModeTable:
    """Per-channel alphabets: channel ``k`` maps each of its labels to the
    channels that label attacks."""

    alphabets: tuple  # of dict label -> ChannelSelection

    def selection(self, composite) -> ChannelSelection:
        composite = _flat(composite)
        if len(composite) != len(self.alphabets):
            raise InvalidGraph(f"label {composite!r} does not match {len(self.alphabets)} channels")
        sel = ChannelSelection()
        for lab, alpha in zip(composite, self.alphabets):
            if lab not in alpha:
                raise InvalidGraph(f"label {lab!r} not in channel alphabet {sorted(alpha)}")
            part = alpha[lab]
            if sel.attacked_inputs & part.attacked_inputs or sel.attacked_outputs & part.attacked_outputs:
                raise InvalidGraph("channel supports of the product overlap")
            sel = sel | part
        return sel


def mode_id(composite) -> str:
    """Deterministic mode name of a composite label; all-nominal maps to ``N``."""
    composite = _flat(composite)
    if all(lab == NOMINAL for lab in composite):
        return NOMINAL
    return ",".join(str(lab) for lab in composite)


def compose_modes(table: ModeTable, graphs) -> tuple[AttackGraph, dict]:
    """Product of the per-channel graphs with labels replaced by mode ids.

    Returns the product graph and a map ``mode id -> ChannelSelection``.
    """
    graphs = list(graphs)
    if len(graphs) != len(table.alphabets):
        raise InvalidGraph("one graph per channel alphabet is required")
    for G in graphs:
        problems = validate(G)
        if problems:
            raise InvalidGraph("; ".join(problems))
    prod = graphs[0]
    for G in graphs[1:]:
        prod = kron_product(prod, G)
    selections = {}
    mapping = {}
    for lab in prod.labels:
        mid = mode_id(lab)
        mapping[lab] = mid
        selections[mid] = table.selection(lab)
    return prod.relabel(mapping), selections
