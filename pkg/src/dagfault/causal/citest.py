"""Conditional-independence tests: Fisher-z partial correlation and a d-separation oracle.

Test objects are callables ``test(i, j, S) -> CITestResult`` that count how
often they are asked (``n_calls``) and how many distinct tests they actually
evaluated (``n_tests``); repeated queries are answered from a cache.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..exceptions import CITooFewSamples, SingularSubmatrixWarning

RIDGE = 1e-8
COND_LIMIT = 1e12


@dataclass(frozen=True)
class CITestResult:
    statistic: float
    p_value: float
    independent: bool


def partial_correlation(C, i, j, S) -> float:
    """``rho_{ij.S}`` from the inverse of the correlation submatrix over ``{i, j} | S``."""
    idx = [i, j, *S]
    sub = C[np.ix_(idx, idx)]
    if len(idx) > 2 and np.linalg.cond(sub) > COND_LIMIT:
        warnings.warn(f"singular correlation submatrix for ({i}, {j} | {list(S)}); adding ridge",
                      SingularSubmatrixWarning, stacklevel=3)
        sub = sub + RIDGE * np.eye(len(idx))
    if len(idx) == 2:
        return float(sub[0, 1])
    P = np.linalg.inv(sub)
    return float(-P[0, 1] / math.sqrt(P[0, 0] * P[1, 1]))


def fisher_z_from_corr(C, n, i, j, S, alpha) -> CITestResult:
    dof = n - len(S) - 3
    if dof <= 0:
        raise CITooFewSamples(f"n={n} too small for a conditioning set of size {len(S)}")
    rho = partial_correlation(C, i, j, S)
    rho = min(max(rho, -1.0), 1.0)
    if abs(rho) >= 1.0:
        z = math.inf
    else:
        z = 0.5 * math.log((1.0 + rho) / (1.0 - rho)) * math.sqrt(dof)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return CITestResult(float(z), float(p), p > alpha)


def fisher_z(data, i, j, S=(), alpha=0.05) -> CITestResult:
    """Fisher-z test of ``X_i independent of X_j given X_S`` on a sample matrix."""
    if i == j:
        raise ValueError("i and j must differ")
    data = np.asarray(data, dtype=float)
    return fisher_z_from_corr(np.corrcoef(data, rowvar=False), data.shape[0], i, j, tuple(S), alpha)


class _CountingTest:
    def __init__(self):
        self.n_calls = 0
        self._cache = {}

    @property
    def n_tests(self):
        return len(self._cache)

    def __call__(self, i, j, S=()) -> CITestResult:
        self.n_calls += 1
        key = (min(i, j), max(i, j), frozenset(S))
        if key not in self._cache:
            self._cache[key] = self._evaluate(min(i, j), max(i, j), tuple(sorted(S)))
        return self._cache[key]

    def reset_counts(self):
        self.n_calls = 0
        self._cache.clear()


class FisherZ(_CountingTest):
    """Fisher-z test over a fixed data matrix; the correlation matrix is computed once."""

    def __init__(self, data, alpha=0.05):
        super().__init__()
        data = np.asarray(data, dtype=float)
        self.n = data.shape[0]
        self.alpha = alpha
        self.corr = np.corrcoef(data, rowvar=False)
        self.n_vars = data.shape[1]

    def _evaluate(self, i, j, S):
        return fisher_z_from_corr(self.corr, self.n, i, j, S, self.alpha)


def d_separated(dag, i, j, S) -> bool:
    """True when ``i`` and ``j`` are d-separated by ``S`` in the DAG ``dag[a, b]`` (a -> b).

    Uses the moral graph of the ancestral set of ``{i, j} | S``.
    """
    A = np.asarray(dag, dtype=bool)
    S = set(S)
    keep = {i, j} | S
    stack = list(keep)
    while stack:
        v = stack.pop()
        for p in np.flatnonzero(A[:, v]):
            if p not in keep:
                keep.add(int(p))
                stack.append(int(p))
    nodes = sorted(keep)
    und = {v: set() for v in nodes}
    for v in nodes:
        parents = [int(p) for p in np.flatnonzero(A[:, v]) if p in keep]
        for p in parents:
            und[v].add(p)
            und[p].add(v)
        for a in parents:
            for b in parents:
                if a != b:
                    und[a].add(b)
    seen, stack = {i}, [i]
    while stack:
        v = stack.pop()
        for w in und[v]:
            if w in S or w in seen:
                continue
            if w == j:
                return False
            seen.add(w)
            stack.append(w)
    return True


class DSeparationOracle(_CountingTest):
    """Perfect CI test for a known DAG: independent exactly when d-separated.

    ``observed`` lists the DAG nodes visible to the caller (default all);
    test indices refer to positions in that list, so the rest act as latents.
    """

    def __init__(self, dag, observed=None):
        super().__init__()
        self.dag = np.asarray(dag, dtype=bool)
        self.observed = list(range(len(self.dag))) if observed is None else list(observed)
        self.n_vars = len(self.observed)

    def _evaluate(self, i, j, S):
        o = self.observed
        sep = d_separated(self.dag, o[i], o[j], [o[s] for s in S])
        return CITestResult(0.0 if sep else math.inf, 1.0 if sep else 0.0, sep)
