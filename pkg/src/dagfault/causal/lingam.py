"""ICA-based linear non-Gaussian acyclic model estimation.

FastICA (symmetric fixed point, log-cosh contrast) gives an unmixing matrix;
its rows are permuted so the diagonal has no small entries, scaled to a unit
diagonal, and ``B = I - W`` is read as the connection matrix
(``x = B x + e``, ``B[i, j]`` is the effect of ``j`` on ``i``).
"""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import kurtosis
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array

from ..exceptions import GaussianDegeneracy, IcaNonConvergence
from .graph import MixedGraph

log = logging.getLogger(__name__)

BRUTE_FORCE_MAX = 8


@dataclass(frozen=True)
class LingamConfig:
    prune_threshold: float = 0.05
    max_iter: int = 1000
    tol: float = 1e-4
    restarts: int = 5
    kurtosis_floor: float = 0.2
    seed: int = 0


def _sym_decorrelate(W):
    s, u = np.linalg.eigh(W @ W.T)
    s = np.clip(s, 1e-300, None)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ W


def fast_ica(X, max_iter=1000, tol=1e-4, restarts=5, seed=0):
    """Unmixing matrix ``W`` (sources ``S = W (X - mean)``) by symmetric FastICA.

    Raises :class:`IcaNonConvergence` when no restart converges.
    """
    Xc = X - X.mean(axis=0)
    n, d = Xc.shape
    cov = Xc.T @ Xc / n
    evals, evecs = np.linalg.eigh(cov)
    evals = np.clip(evals, 1e-12, None)
    K = (evecs / np.sqrt(evals)).T  # whitening: Z = K x
    Z = Xc @ K.T
    rng = np.random.default_rng(seed)
    for attempt in range(restarts):
        W = _sym_decorrelate(rng.normal(size=(d, d)))
        for _ in range(max_iter):
            Y = Z @ W.T
            G = np.tanh(Y)
            W_new = (G.T @ Z) / n - np.diag((1.0 - G * G).mean(axis=0)) @ W
            W_new = _sym_decorrelate(W_new)
            lim = np.max(np.abs(np.abs(np.einsum("ij,ij->i", W_new, W)) - 1.0))
            W = W_new
            if lim < tol:
                return W @ K
        log.debug("FastICA restart %d did not converge", attempt)
    raise IcaNonConvergence(f"FastICA did not converge in {restarts} restarts of {max_iter} iterations")


def _permute_to_diagonal(W):
    """Row permutation minimising ``sum 1/|w_ii|`` (assignment problem), then unit diagonal."""
    cost = 1.0 / np.maximum(np.abs(W), 1e-300)
    rows, cols = linear_sum_assignment(cost)
    Wp = np.empty_like(W)
    Wp[cols] = W[rows]
    return Wp / np.diag(Wp)[:, None]


def causal_order(B) -> list[int]:
    """Order making ``B`` as close to strictly lower triangular as possible.

    Exhaustive over permutations for up to ``BRUTE_FORCE_MAX`` variables,
    otherwise the smallest entries are zeroed until a permutation exists.
    """
    d = len(B)
    B2 = B * B
    if d <= BRUTE_FORCE_MAX:
        perms = np.array(list(itertools.permutations(range(d))))
        upper = np.triu(np.ones((d, d), dtype=bool), 1)
        best, best_cost = None, np.inf
        for chunk in np.array_split(perms, max(1, len(perms) // 5000)):
            sub = B2[chunk[:, :, None], chunk[:, None, :]]
            cost = sub[:, upper].sum(axis=1)
            k = int(np.argmin(cost))
            if cost[k] < best_cost:
                best, best_cost = chunk[k], cost[k]
        return [int(v) for v in best]
    A = np.abs(B).copy()
    np.fill_diagonal(A, 0.0)
    flat = np.argsort(A, axis=None, kind="stable")  # the zero diagonal sorts first
    start = d * (d + 1) // 2
    A.flat[flat[:start]] = 0.0
    for k in flat[start:]:
        order = _lower_triangular_order(A)
        if order is not None:
            return order
        A.flat[k] = 0.0
    return _lower_triangular_order(A)


def _lower_triangular_order(A):
    remaining = list(range(len(A)))
    order = []
    while remaining:
        sub = A[np.ix_(remaining, remaining)]
        roots = [remaining[i] for i in range(len(remaining)) if not np.any(sub[i] != 0)]
        if not roots:
            return None
        order.append(roots[0])
        remaining.remove(roots[0])
    return order


class ICALiNGAM(BaseEstimator):
    """Estimator form; ``adjacency_matrix_[i, j]`` is the effect of ``j`` on ``i``."""

    def __init__(self, prune_threshold=0.05, max_iter=1000, tol=1e-4, restarts=5, kurtosis_floor=0.2,
                 random_state=0):
        self.prune_threshold = prune_threshold
        self.max_iter = max_iter
        self.tol = tol
        self.restarts = restarts
        self.kurtosis_floor = kurtosis_floor
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float, ensure_min_features=2)
        W = fast_ica(X, self.max_iter, self.tol, self.restarts, self.random_state)
        residuals = (X - X.mean(axis=0)) @ W.T
        if np.all(np.abs(kurtosis(residuals, axis=0)) < self.kurtosis_floor):
            warnings.warn("estimated noise looks Gaussian; orientations are unreliable",
                          GaussianDegeneracy, stacklevel=2)
        Wp = _permute_to_diagonal(W)
        B = np.eye(len(Wp)) - Wp
        self.raw_adjacency_ = B
        self.causal_order_ = causal_order(B)
        pos = np.empty(len(B), dtype=int)
        pos[self.causal_order_] = np.arange(len(B))
        keep = (np.abs(B) >= self.prune_threshold) & (pos[None, :] < pos[:, None])
        self.adjacency_matrix_ = np.where(keep, B, 0.0)
        return self


def ica_lingam(data, cfg: LingamConfig | None = None, vertices=None) -> MixedGraph:
    """Weighted DAG; an edge ``j -> i`` carries the estimated coefficient ``B[i, j]``."""
    cfg = cfg or LingamConfig()
    est = ICALiNGAM(cfg.prune_threshold, cfg.max_iter, cfg.tol, cfg.restarts, cfg.kurtosis_floor,
                    cfg.seed).fit(data)
    d = est.adjacency_matrix_.shape[0]
    g = MixedGraph.from_directed(vertices or [f"x{i}" for i in range(d)], est.adjacency_matrix_.T)
    g.causal_order = [g.vertices[i] for i in est.causal_order_]
    g.raw_adjacency = est.raw_adjacency_
    return g
