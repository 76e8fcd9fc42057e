"""FCI and RFCI: partial ancestral graphs allowing latent confounders."""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .graph import ARROW, CIRCLE, NONE, MixedGraph
from .pag import apply_rules, orient_unshielded_colliders, possible_d_sep
from .skeleton import ConstraintConfig, make_test, stable_skeleton


def _pag(M, vertices, d):
    return MixedGraph(vertices or [f"x{i}" for i in range(d)], M, kind="pag")


def _start(data, cfg, alpha, test):
    cfg = cfg or ConstraintConfig(alpha=alpha)
    test = make_test(data, cfg.alpha, test)
    d = test.n_vars
    if d < 2:
        raise ValueError("at least two variables are required")
    adj, sepsets = stable_skeleton(test, d, cfg.max_cond_size)
    return cfg, test, d, adj, sepsets


def _prune_possible_d_sep(M, adj, sepsets, test, max_cond_size):
    """Second adjacency pass conditioning on subsets of Possible-D-Sep sets."""
    d = len(M)
    pds = [possible_d_sep(M, a) for a in range(d)]
    for a in range(d):
        for b in range(a + 1, d):
            if not adj[a, b]:
                continue
            done = False
            for x, y in ((a, b), (b, a)):
                cand = [v for v in pds[x] if v != y]
                for size in range(0, min(max_cond_size, len(cand)) + 1):
                    for S in combinations(cand, size):
                        if test(x, y, S).independent:
                            adj[a, b] = adj[b, a] = False
                            sepsets.put(a, b, S)
                            done = True
                            break
                    if done:
                        break
                if done:
                    break


def fci(data=None, alpha=0.05, cfg: ConstraintConfig | None = None, vertices=None, test=None):
    """PAG from the skeleton, a Possible-D-Sep pruning pass and the orientation rules."""
    cfg, test, d, adj, sepsets = _start(data, cfg, alpha, test)
    M = np.where(adj, CIRCLE, NONE).astype(np.int8)
    orient_unshielded_colliders(M, sepsets)
    _prune_possible_d_sep(M, adj, sepsets, test, cfg.max_cond_size)
    M = np.where(adj, CIRCLE, NONE).astype(np.int8)
    orient_unshielded_colliders(M, sepsets)
    apply_rules(M, sepsets)
    return _pag(M, vertices, d)


# -- RFCI -------------------------------------------------------------------

def _minimal_sepset(test, x, y, S):
    for size in range(len(S) + 1):
        for T in combinations(S, size):
            if test(x, y, T).independent:
                return T
    return tuple(S)


def _remove_edge(M, sepsets, x, y, S, pending):
    M[x, y] = M[y, x] = NONE
    sepsets.put(x, y, S)
    for z in np.flatnonzero((M[x] != NONE) & (M[y] != NONE)):
        if int(z) not in S:
            pending.append((min(x, y), int(z), max(x, y)))


def _rfci_colliders(M, sepsets, test):
    """Confirm unshielded colliders with two extra tests each; refuted triples drop an edge."""
    d = len(M)
    pending = []
    for c in range(d):
        nbrs = np.flatnonzero(M[c] != NONE)
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1:]:
                if M[a, b] == NONE and c not in sepsets.get_set(a, b):
                    pending.append((int(a), c, int(b)))
    pending.sort()
    confirmed = []
    while pending:
        a, c, b = pending.pop(0)
        if M[a, b] != NONE or M[a, c] == NONE or M[b, c] == NONE:
            continue
        S = sepsets.get_set(a, b)
        ra, rb = test(a, c, S), test(b, c, S)
        if not ra.independent and not rb.independent:
            confirmed.append((a, c, b))
            continue
        for x, r in ((a, ra), (b, rb)):
            if r.independent and M[x, c] != NONE:
                _remove_edge(M, sepsets, x, c, _minimal_sepset(test, x, c, S), pending)
    for a, c, b in confirmed:
        if M[a, b] == NONE and M[a, c] != NONE and M[b, c] != NONE and c not in sepsets.get_set(a, b):
            M[a, c] = M[b, c] = ARROW


def _rfci_r4_check(test, sepsets):
    def check(M, path, c):
        S = sepsets.get_set(path[0], c)
        removed = False
        for x, y in zip(path[:-1], path[1:]):
            T = tuple(v for v in S if v not in (x, y))
            if M[x, y] != NONE and test(x, y, T).independent:
                M[x, y] = M[y, x] = NONE
                sepsets.put(x, y, T)
                removed = True
        for v in path[1:-1]:
            T = tuple(s for s in S if s != v)
            if M[v, c] != NONE and test(v, c, T).independent:
                M[v, c] = M[c, v] = NONE
                sepsets.put(v, c, T)
                removed = True
        return removed
    return check


def rfci(data=None, alpha=0.05, cfg: ConstraintConfig | None = None, vertices=None, test=None):
    """Really fast FCI: local checks on colliders and discriminating paths replace Possible-D-Sep."""
    cfg, test, d, adj, sepsets = _start(data, cfg, alpha, test)
    M = np.where(adj, CIRCLE, NONE).astype(np.int8)
    _rfci_colliders(M, sepsets, test)
    apply_rules(M, sepsets, r4_check=_rfci_r4_check(test, sepsets))
    return _pag(M, vertices, d)
