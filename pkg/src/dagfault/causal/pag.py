"""Orientation rules for partial ancestral graphs.

Mark matrix convention as in :mod:`.graph`: ``M[x, y]`` is the mark at
``y``. Implemented: unshielded colliders (R0), R1-R4 and R8-R10. The rules
for selection bias (R5-R7) are not used.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .graph import ARROW, CIRCLE, NONE, TAIL


def orient_unshielded_colliders(M, sepsets):
    d = len(M)
    for c in range(d):
        nbrs = np.flatnonzero(M[c] != NONE)
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1:]:
                if M[a, b] != NONE:
                    continue
                S = sepsets.get_set(a, b)
                if S is not None and c not in S:
                    M[a, c] = ARROW
                    M[b, c] = ARROW


def _adj(M, a, b):
    return M[a, b] != NONE


def _pd_edge(M, x, y):
    """Edge ``x - y`` can be part of a potentially directed path from x to y."""
    return M[x, y] != NONE and M[y, x] != ARROW and M[x, y] != TAIL


def uncovered_pd_path(M, start, first, target, forbid=()):
    """Is there an uncovered potentially directed path ``start, first, ..., target``?"""
    if not _pd_edge(M, start, first):
        return False
    if first == target:
        return True
    stack = [(start, first, frozenset({start, first, *forbid}))]
    while stack:
        prev, cur, seen = stack.pop()
        for nxt in np.flatnonzero(M[cur] != NONE):
            nxt = int(nxt)
            if nxt in seen or _adj(M, prev, nxt) or not _pd_edge(M, cur, nxt):
                continue
            if nxt == target:
                return True
            stack.append((cur, nxt, seen | {nxt}))
    return False


def discriminating_path(M, b, c):
    """Shortest discriminating path ``[theta, ..., a, b]`` for ``b`` with respect to ``c``, or None."""
    d = len(M)
    best = None
    for a in range(d):
        if a in (b, c) or not (M[a, c] == ARROW and M[c, a] == TAIL):
            continue
        if not (_adj(M, a, b) and M[b, a] == ARROW):
            continue
        queue = deque([[a]])
        seen = {a, b, c}
        while queue:
            path = queue.popleft()
            x = path[-1]
            for w in np.flatnonzero(M[x] != NONE):
                w = int(w)
                if w in seen or M[w, x] != ARROW:
                    continue
                if not _adj(M, w, c):
                    cand = [w, *reversed(path), b]
                    if best is None or len(cand) < len(best):
                        best = cand
                    queue.clear()
                    break
                if M[x, w] == ARROW and M[w, c] == ARROW and M[c, w] == TAIL:
                    seen.add(w)
                    queue.append(path + [w])
    return best


def _orient_r4(M, path, c, sepsets):
    theta, a, b = path[0], path[-2], path[-1]
    S = sepsets.get_set(theta, c)
    if S is None:
        return False
    if b in S:
        M[b, c], M[c, b] = ARROW, TAIL
    else:
        M[a, b] = M[b, a] = ARROW
        M[b, c] = M[c, b] = ARROW
    return True


def apply_rules(M, sepsets, r4_check=None):
    """Apply R1-R4 and R8-R10 to closure.

    ``r4_check(M, path, c)`` may veto an R4 orientation by returning True
    after changing the skeleton (RFCI's extra tests); the sweep then restarts.
    """
    d = len(M)
    changed = True
    while changed:
        changed = False
        for a in range(d):
            for b in range(d):
                if a == b or not _adj(M, a, b):
                    continue
                changed |= _r1_r2_r3(M, a, b, d)
        for b in range(d):
            for c in range(d):
                if b == c or M[c, b] != CIRCLE:
                    continue
                path = discriminating_path(M, b, c)
                if path is None:
                    continue
                if r4_check is not None and r4_check(M, path, c):
                    changed = True
                    break
                changed |= _orient_r4(M, path, c, sepsets)
            else:
                continue
            break
        for a in range(d):
            for c in range(d):
                if a != c and M[a, c] == ARROW and M[c, a] == CIRCLE and _tail_rules(M, a, c, d):
                    M[c, a] = TAIL
                    changed = True
    return M


def _r1_r2_r3(M, a, b, d):
    changed = False
    for x in range(d):
        if x in (a, b):
            continue
        # R1: x *-> a o-* b, x and b not adjacent  =>  a -> b
        if M[b, a] == CIRCLE and M[x, a] == ARROW and not _adj(M, x, b):
            M[a, b], M[b, a] = ARROW, TAIL
            changed = True
            break
    # R2: a -> x *-> b or a *-> x -> b, with a *-o b  =>  a *-> b
    if M[a, b] == CIRCLE:
        for x in range(d):
            if x in (a, b) or not (_adj(M, a, x) and _adj(M, x, b)):
                continue
            if (M[a, x] == ARROW and M[x, a] == TAIL and M[x, b] == ARROW) or \
               (M[a, x] == ARROW and M[x, b] == ARROW and M[b, x] == TAIL):
                M[a, b] = ARROW
                changed = True
                break
    # R3: x *-> b <-* y, x *-o a o-* y, x and y not adjacent, a *-o b  =>  a *-> b
    if M[a, b] == CIRCLE:
        xs = [x for x in range(d) if x not in (a, b) and M[x, b] == ARROW and M[x, a] == CIRCLE]
        for i, x in enumerate(xs):
            for y in xs[i + 1:]:
                if not _adj(M, x, y):
                    M[a, b] = ARROW
                    return True
    return changed


def _tail_rules(M, a, c, d):
    """R8-R10 for ``a o-> c``: True when ``a -> c`` follows."""
    # R8: a -> b -> c or a -o b -> c
    for b in range(d):
        if b in (a, c):
            continue
        if M[b, a] == TAIL and M[a, b] in (ARROW, CIRCLE) and M[b, c] == ARROW and M[c, b] == TAIL:
            return True
    # R9: uncovered p.d. path a, b, ..., c with b and c not adjacent
    for b in np.flatnonzero(M[a] != NONE):
        b = int(b)
        if b != c and not _adj(M, b, c) and uncovered_pd_path(M, a, b, c):
            return True
    # R10: b -> c <- e, uncovered p.d. paths a..b and a..e whose first steps differ and are not adjacent
    parents = [b for b in range(d) if b != a and M[b, c] == ARROW and M[c, b] == TAIL]
    if len(parents) < 2:
        return False
    firsts = [int(m) for m in np.flatnonzero(M[a] != NONE) if m != c and _pd_edge(M, a, int(m))]
    for i, b in enumerate(parents):
        for e in parents[i + 1:]:
            mus = [m for m in firsts if uncovered_pd_path(M, a, m, b, forbid=(c,))]
            omegas = [w for w in firsts if uncovered_pd_path(M, a, w, e, forbid=(c,))]
            for mu in mus:
                for om in omegas:
                    if mu != om and not _adj(M, mu, om):
                        return True
    return False


def possible_d_sep(M, a):
    """Vertices reachable from ``a`` along paths whose every interior vertex is a collider or in a triangle."""
    out = set()
    seen = set()
    queue = deque()
    for v in np.flatnonzero(M[a] != NONE):
        queue.append((a, int(v)))
        seen.add((a, int(v)))
        out.add(int(v))
    while queue:
        prev, cur = queue.popleft()
        for nxt in np.flatnonzero(M[cur] != NONE):
            nxt = int(nxt)
            if nxt == prev or nxt == a or (cur, nxt) in seen:
                continue
            collider = M[prev, cur] == ARROW and M[nxt, cur] == ARROW
            if collider or _adj(M, prev, nxt):
                seen.add((cur, nxt))
                out.add(nxt)
                queue.append((cur, nxt))
    return sorted(out)
