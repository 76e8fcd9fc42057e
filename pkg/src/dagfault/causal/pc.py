"""PC: stable skeleton, collider orientation from sepsets, Meek closure."""

from __future__ import annotations

import numpy as np

from .graph import ARROW, NONE, TAIL, MixedGraph
from .skeleton import ConstraintConfig, make_test, stable_skeleton


def _undirected(M, a, b):
    return M[a, b] == TAIL and M[b, a] == TAIL


def _directed(M, a, b):
    return M[a, b] == ARROW and M[b, a] == TAIL


def _orient(M, a, b):
    M[a, b] = ARROW
    M[b, a] = TAIL


def orient_colliders(M, sepsets):
    """Orient ``a -> c <- b`` for unshielded triples with ``c`` outside sepset(a, b).

    An edge already oriented the other way is left alone (first orientation wins).
    """
    d = len(M)
    for c in range(d):
        nbrs = np.flatnonzero(M[c] != NONE)
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1:]:
                if M[a, b] != NONE:
                    continue
                S = sepsets.get_set(a, b)
                if S is None or c in S:
                    continue
                for x in (a, b):
                    if not _directed(M, c, x):
                        _orient(M, x, c)


def meek_closure(M):
    """Apply Meek rules R1-R3 until nothing changes."""
    d = len(M)
    changed = True
    while changed:
        changed = False
        for a in range(d):
            for b in range(d):
                if a == b or not _undirected(M, a, b):
                    continue
                if _meek_applies(M, a, b, d):
                    _orient(M, a, b)
                    changed = True
    return M


def _meek_applies(M, a, b, d):
    for c in range(d):
        if c in (a, b):
            continue
        # R1: c -> a - b, c and b not adjacent
        if _directed(M, c, a) and M[c, b] == NONE:
            return True
        # R2: a -> c -> b
        if _directed(M, a, c) and _directed(M, c, b):
            return True
    # R3: a - c1 -> b, a - c2 -> b, c1 and c2 not adjacent
    mids = [c for c in range(d) if c not in (a, b) and _undirected(M, a, c) and _directed(M, c, b)]
    for i, c1 in enumerate(mids):
        for c2 in mids[i + 1:]:
            if M[c1, c2] == NONE:
                return True
    return False


def pc(data=None, alpha=0.05, cfg: ConstraintConfig | None = None, vertices=None, test=None,
       return_sepsets=False):
    """CPDAG estimate from ``data`` (or from a supplied CI ``test``)."""
    cfg = cfg or ConstraintConfig(alpha=alpha)
    test = make_test(data, cfg.alpha, test)
    d = test.n_vars
    if d < 2:
        raise ValueError("pc needs at least two variables")
    adj, sepsets = stable_skeleton(test, d, cfg.max_cond_size)
    M = np.where(adj, TAIL, NONE).astype(np.int8)
    orient_colliders(M, sepsets)
    meek_closure(M)
    g = MixedGraph(vertices or [f"x{i}" for i in range(d)], M, kind="cpdag")
    return (g, sepsets) if return_sepsets else g
