"""Mixed graphs with tail, arrow and circle edge marks.

``marks[a, b]`` is the mark at ``b`` on the edge between ``a`` and ``b``
(``NONE`` when the pair is not adjacent). A directed edge ``a -> b`` is
``marks[a, b] == ARROW`` and ``marks[b, a] == TAIL``; an undirected CPDAG
edge has tails at both ends.
"""

from __future__ import annotations

import json

import numpy as np

from ..exceptions import GraphError

NONE, CIRCLE, ARROW, TAIL = 0, 1, 2, 3
MARK_NAMES = {CIRCLE: "circle", ARROW: "arrow", TAIL: "tail"}
MARK_CODES = {v: k for k, v in MARK_NAMES.items()}
KINDS = ("cpdag", "pag", "weighted_dag")
_DOT_HEAD = {CIRCLE: "odot", ARROW: "normal", TAIL: "none"}


def topological_order(directed) -> list[int] | None:
    """Kahn order of a boolean adjacency ``directed[i, j]`` (i -> j); ``None`` if cyclic."""
    A = np.asarray(directed, dtype=bool)
    indeg = A.sum(axis=0).astype(int)
    ready = sorted(np.flatnonzero(indeg == 0).tolist())
    order = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        for w in np.flatnonzero(A[v]):
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(int(w))
        ready.sort()
    return order if len(order) == len(A) else None


class MixedGraph:
    def __init__(self, vertices, marks=None, weights=None, kind="pag"):
        self.vertices = [str(v) for v in vertices]
        d = len(self.vertices)
        if len(set(self.vertices)) != d:
            raise GraphError("duplicate vertex ids")
        self.marks = np.zeros((d, d), dtype=np.int8) if marks is None else np.array(marks, dtype=np.int8)
        self.weights = None if weights is None else np.array(weights, dtype=float)
        if kind not in KINDS:
            raise GraphError(f"unknown graph kind {kind!r}")
        self.kind = kind
        self.validate()

    # -- construction ---------------------------------------------------

    @classmethod
    def from_directed(cls, vertices, W, kind="weighted_dag", weighted=True):
        """Graph with an edge ``i -> j`` wherever ``W[i, j] != 0``."""
        W = np.asarray(W, dtype=float)
        A = W != 0
        marks = np.zeros(W.shape, dtype=np.int8)
        marks[A] = ARROW
        marks[A.T] = TAIL
        return cls(vertices, marks, np.where(A, W, 0.0) if weighted else None, kind)

    @classmethod
    def from_skeleton(cls, vertices, adj, mark=TAIL, kind="cpdag"):
        adj = np.asarray(adj, dtype=bool)
        return cls(vertices, np.where(adj, mark, NONE), None, kind)

    def copy(self):
        return MixedGraph(self.vertices, self.marks.copy(),
                          None if self.weights is None else self.weights.copy(), self.kind)

    # -- checks ---------------------------------------------------------

    def validate(self):
        M = self.marks
        d = len(self.vertices)
        if M.shape != (d, d):
            raise GraphError("mark matrix shape does not match vertex count")
        if np.any(np.diag(M) != NONE):
            raise GraphError("self loops are not allowed")
        if not np.array_equal(M != NONE, (M != NONE).T):
            raise GraphError("edge present at one end only")
        if not np.isin(M, (NONE, CIRCLE, ARROW, TAIL)).all():
            raise GraphError("unknown mark code")
        if self.kind == "cpdag" and np.any(M == CIRCLE):
            raise GraphError("cpdag edges take tail or arrow marks only")
        if self.kind == "weighted_dag":
            arrow = M == ARROW
            if not np.array_equal(arrow.T, M == TAIL):
                raise GraphError("weighted_dag edges must all be tail -> arrow")
            if topological_order(arrow) is None:
                raise GraphError("weighted_dag contains a directed cycle")

    # -- queries --------------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    def index(self, v):
        return self.vertices.index(v) if isinstance(v, str) else int(v)

    def adjacency(self):
        return self.marks != NONE

    def adjacent(self, a, b):
        return self.marks[self.index(a), self.index(b)] != NONE

    def directed(self):
        """Boolean ``D[i, j]`` for every edge ``i -> j``."""
        return (self.marks == ARROW) & (self.marks.T == TAIL)

    def n_edges(self):
        return int(np.triu(self.adjacency(), 1).sum())

    def edges(self):
        """``(a, b, mark_at_a, mark_at_b, weight)`` for each adjacent pair, ``a`` before ``b``."""
        out = []
        for a, b in zip(*np.nonzero(np.triu(self.adjacency(), 1))):
            w = None
            if self.weights is not None:
                w = float(self.weights[a, b] if self.marks[a, b] == ARROW else self.weights[b, a])
            out.append((self.vertices[a], self.vertices[b], MARK_NAMES[int(self.marks[b, a])],
                        MARK_NAMES[int(self.marks[a, b])], w))
        return out

    def topological_order(self):
        order = topological_order(self.directed())
        if order is None:
            raise GraphError("graph has a directed cycle")
        return order

    def __eq__(self, other):
        return (isinstance(other, MixedGraph) and self.vertices == other.vertices
                and self.kind == other.kind and np.array_equal(self.marks, other.marks))

    def __repr__(self):
        return f"MixedGraph(kind={self.kind}, vertices={len(self.vertices)}, edges={self.n_edges()})"

    # -- serialization --------------------------------------------------

    def to_dict(self):
        edges = []
        for a, b, ma, mb, w in self.edges():
            e = {"a": a, "b": b, "mark_a": ma, "mark_b": mb}
            if w is not None:
                e["weight"] = w
            edges.append(e)
        return {"kind": self.kind, "vertices": list(self.vertices), "edges": edges}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        vertices = d["vertices"]
        pos = {v: i for i, v in enumerate(vertices)}
        n = len(vertices)
        marks = np.zeros((n, n), dtype=np.int8)
        weights = np.zeros((n, n)) if any("weight" in e for e in d["edges"]) else None
        for e in d["edges"]:
            a, b = pos[e["a"]], pos[e["b"]]
            marks[b, a] = MARK_CODES[e["mark_a"]]
            marks[a, b] = MARK_CODES[e["mark_b"]]
            if weights is not None and "weight" in e:
                if marks[a, b] == ARROW:
                    weights[a, b] = e["weight"]
                else:
                    weights[b, a] = e["weight"]
        return cls(vertices, marks, weights, d["kind"])

    def to_dot(self, name="G") -> str:
        """Graphviz text; arrowheads encode marks, weights label edges to 2 decimals."""
        lines = [f'digraph "{name}" {{', "  node [shape=ellipse];"]
        for v in self.vertices:
            lines.append(f'  "{v}";')
        for a, b, ma, mb, w in self.edges():
            attrs = ["dir=both", f"arrowtail={_DOT_HEAD[MARK_CODES[ma]]}",
                     f"arrowhead={_DOT_HEAD[MARK_CODES[mb]]}"]
            if w is not None:
                attrs.append(f'label="{w:.2f}"')
            lines.append(f'  "{a}" -> "{b}" [{", ".join(attrs)}];')
        lines.append("}")
        return "\n".join(lines) + "\n"
