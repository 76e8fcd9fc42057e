"""Random linear structural equation models for testing the discovery algorithms.

Weighted adjacency follows ``W[i, j]`` = weight of ``i -> j``; samples
satisfy ``X = X W + E``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NOISES = ("uniform", "laplace", "gaussian", "exponential")


@dataclass
class LinearSEM:
    W: np.ndarray
    order: list
    noise: str
    noise_scale: np.ndarray

    @property
    def dag(self):
        return self.W != 0

    def sample(self, n, rng):
        d = len(self.W)
        E = _noise(self.noise, (n, d), rng) * self.noise_scale
        X = np.zeros((n, d))
        for j in self.order:
            X[:, j] = X @ self.W[:, j] + E[:, j]
        return X


def _noise(kind, shape, rng):
    """Zero-mean, unit-variance noise."""
    if kind == "uniform":
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), shape)
    if kind == "laplace":
        return rng.laplace(0.0, 1.0 / np.sqrt(2.0), shape)
    if kind == "gaussian":
        return rng.normal(0.0, 1.0, shape)
    if kind == "exponential":
        return rng.exponential(1.0, shape) - 1.0
    raise ValueError(f"unknown noise {kind!r}; expected one of {NOISES}")


def random_dag(d, edge_prob, rng, min_edges=0):
    """Boolean DAG with edges only from earlier to later in a random order."""
    while True:
        order = rng.permutation(d)
        low = np.triu(rng.random((d, d)) < edge_prob, 1)
        A = np.zeros((d, d), dtype=bool)
        A[np.ix_(order, order)] = low
        if A.sum() >= min_edges:
            return A, [int(v) for v in order]


def random_sem(d, seed, edge_prob=0.4, weight_range=(0.5, 2.0), noise="uniform", noise_scale=1.0,
               min_edges=0, signed=True) -> LinearSEM:
    """Random DAG with weights ``|w|`` drawn from ``weight_range``.

    With ``signed=False`` all weights are positive, so effects along parallel
    paths cannot cancel.
    """
    rng = np.random.default_rng(seed)
    A, order = random_dag(d, edge_prob, rng, min_edges)
    lo, hi = weight_range
    signs = rng.choice([-1.0, 1.0], (d, d)) if signed else 1.0
    W = np.where(A, rng.uniform(lo, hi, (d, d)) * signs, 0.0)
    scale = np.broadcast_to(np.asarray(noise_scale, dtype=float), (d,)).copy()
    return LinearSEM(W, order, noise, scale)


def sem_data(d, n, seed, **kw):
    """``(X, sem)`` for a random SEM; sampling uses a stream separate from the structure draw."""
    sem = random_sem(d, seed, **kw)
    X = sem.sample(n, np.random.default_rng([seed, 1]))
    return X, sem


def order_consistent(order, dag) -> bool:
    """True when every edge of ``dag`` points forward in ``order``."""
    pos = np.empty(len(order), dtype=int)
    pos[list(order)] = np.arange(len(order))
    src, dst = np.nonzero(dag)
    return bool(np.all(pos[src] < pos[dst]))
