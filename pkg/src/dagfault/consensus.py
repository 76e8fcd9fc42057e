"""Agreement between causal graphs learned by different algorithms.

Edge marks are compared after collapsing circles to tails, which puts PAG
and CPDAG outputs on the same footing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .causal.graph import ARROW, CIRCLE, NONE, TAIL, MixedGraph
from .exceptions import VertexSetMismatch

DEFAULT_MIN_COUNT = 3


@dataclass
class EdgeEntry:
    count: int
    algorithms: list
    forward: int = 0  # a -> b
    backward: int = 0  # b -> a


@dataclass
class EdgeFrequencyTable:
    """Skeleton counts per unordered vertex pair ``(a, b)`` with ``a < b`` (indices)."""

    vertices: list
    n_graphs: int
    algorithms: list
    entries: dict = field(default_factory=dict)

    def count_matrix(self):
        d = len(self.vertices)
        C = np.zeros((d, d), dtype=int)
        for (a, b), e in self.entries.items():
            C[a, b] = C[b, a] = e.count
        return C

    def to_dict(self):
        edges = []
        for (a, b), e in sorted(self.entries.items()):
            va, vb = self.vertices[a], self.vertices[b]
            edges.append({
                "a": va, "b": vb, "count": e.count, "algorithms": list(e.algorithms),
                "directions": {f"{va}->{vb}": e.forward, f"{vb}->{va}": e.backward},
            })
        return {"vertices": list(self.vertices), "n_graphs": self.n_graphs,
                "algorithms": list(self.algorithms), "edges": edges}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        """Square count matrix with vertex ids as row and column headers."""
        C = self.count_matrix()
        width = max(3, *(len(v) for v in self.vertices))
        head = " " * width + " " + " ".join(v.rjust(width) for v in self.vertices)
        rows = [v.ljust(width) + " " + " ".join(str(c).rjust(width) for c in C[i])
                for i, v in enumerate(self.vertices)]
        return "\n".join([head, *rows]) + "\n"


def _check_vertices(graphs):
    ref = graphs[0].vertices
    for g in graphs[1:]:
        if g.vertices != ref:
            raise VertexSetMismatch(f"vertex sets differ: {ref} vs {g.vertices}")
    return ref


def skeleton_agreement(graphs, names=None) -> EdgeFrequencyTable:
    """Count how many graphs contain each adjacency and tally strict ``tail -> arrow`` directions."""
    graphs = list(graphs)
    if not graphs:
        raise ValueError("no graphs given")
    vertices = _check_vertices(graphs)
    names = list(names) if names is not None else [f"g{k}" for k in range(len(graphs))]
    if len(names) != len(graphs):
        raise ValueError("one name per graph is required")
    table = EdgeFrequencyTable(list(vertices), len(graphs), names)
    for name, g in zip(names, graphs):
        M = g.marks
        for a, b in zip(*np.nonzero(np.triu(M != NONE, 1))):
            a, b = int(a), int(b)
            e = table.entries.setdefault((a, b), EdgeEntry(0, []))
            e.count += 1
            e.algorithms.append(name)
            if M[a, b] == ARROW and M[b, a] == TAIL:
                e.forward += 1
            elif M[b, a] == ARROW and M[a, b] == TAIL:
                e.backward += 1
    return table


def consensus_graph(table: EdgeFrequencyTable, min_count=DEFAULT_MIN_COUNT) -> MixedGraph:
    """Pairs seen in at least ``min_count`` graphs; directed only when every directed vote agrees."""
    if not 1 <= min_count <= table.n_graphs:
        raise ValueError(f"min_count must lie in 1..{table.n_graphs}")
    d = len(table.vertices)
    M = np.zeros((d, d), dtype=np.int8)
    for (a, b), e in table.entries.items():
        if e.count < min_count:
            continue
        M[a, b] = M[b, a] = TAIL
        if e.forward and not e.backward:
            M[a, b] = ARROW
        elif e.backward and not e.forward:
            M[b, a] = ARROW
    return MixedGraph(table.vertices, M, kind="cpdag")


def _collapse(M):
    return np.where(M == CIRCLE, TAIL, M)


def structural_hamming(g1: MixedGraph, g2: MixedGraph) -> int:
    """Pairs differing in adjacency plus adjacent pairs whose collapsed marks differ."""
    _check_vertices([g1, g2])
    M1, M2 = _collapse(g1.marks), _collapse(g2.marks)
    differ = (M1 != M2) | (M1.T != M2.T)
    return int(np.triu(differ, 1).sum())


def centrality(table: EdgeFrequencyTable, min_count=1) -> dict:
    """Degree of each vertex over pairs seen at least ``min_count`` times (default: union skeleton)."""
    C = table.count_matrix() >= min_count
    return {v: int(C[i].sum()) for i, v in enumerate(table.vertices)}
