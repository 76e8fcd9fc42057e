"""Order-independent adjacency search shared by PC, FCI and RFCI."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .citest import FisherZ

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConstraintConfig:
    alpha: float = 0.05
    max_cond_size: int = 3


class SepsetTable(dict):
    """Unordered vertex pair -> the conditioning set that separated it."""

    def put(self, a, b, S):
        self[frozenset((a, b))] = tuple(sorted(S))

    def get_set(self, a, b):
        return self.get(frozenset((a, b)))

    def to_dict(self, vertices):
        out = {}
        for pair, S in sorted(self.items(), key=lambda kv: sorted(kv[0])):
            a, b = sorted(pair)
            out[f"{vertices[a]}|{vertices[b]}"] = [vertices[s] for s in S]
        return out


def make_test(data, alpha, test=None):
    """Use ``test`` when given, else a Fisher-z test on ``data``."""
    return test if test is not None else FisherZ(data, alpha)


def stable_skeleton(test, n_vars, max_cond_size=3):
    """Remove edges whose endpoints test independent given some neighbour subset.

    Neighbour sets are frozen at the start of each depth level, so the result
    does not depend on the order in which pairs are visited.
    Returns ``(adjacency, sepsets)``.
    """
    adj = ~np.eye(n_vars, dtype=bool)
    sepsets = SepsetTable()
    depth = 0
    while depth <= max_cond_size:
        frozen = [np.flatnonzero(adj[v]).tolist() for v in range(n_vars)]
        enough = False
        for a in range(n_vars):
            for b in range(a + 1, n_vars):
                if not adj[a, b]:
                    continue
                removed = False
                for x, y in ((a, b), (b, a)):
                    cand = [v for v in frozen[x] if v != y]
                    if len(cand) < depth:
                        continue
                    enough = True
                    for S in combinations(cand, depth):
                        if test(x, y, S).independent:
                            adj[a, b] = adj[b, a] = False
                            sepsets.put(a, b, S)
                            removed = True
                            break
                    if removed:
                        break
        log.debug("skeleton depth %d: %d edges", depth, int(adj.sum()) // 2)
        if not enough:
            break
        depth += 1
    return adj, sepsets
