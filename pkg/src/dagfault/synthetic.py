"""Synthetic process data with the TEP variable layout, for demos and tests.

Variables follow a sparse linear SEM with non-Gaussian noise. Each fault
class shifts the noise of a few root-cause variables; the shift propagates
to their descendants, so a fault is visible in a small connected group.
"""

from __future__ import annotations

import numpy as np

from .causal.synth import _noise, random_dag
from .dataset import Dataset, VariableSchema, tep_schema


def tep_like(n_normal=400, n_per_fault=40, n_faults=4, ids=None, seed=0, edge_prob=None,
             shift=3.0, causes_per_fault=2) -> tuple[Dataset, dict]:
    """``(dataset, truth)`` where ``truth`` holds the weight matrix and each fault's root causes."""
    schema = tep_schema() if ids is None else VariableSchema.generic(ids)
    d = len(schema)
    rng = np.random.default_rng(seed)
    p = edge_prob if edge_prob is not None else 1.5 / max(d - 1, 1)
    A, order = random_dag(d, p, rng)
    W = np.where(A, rng.uniform(0.5, 1.0, (d, d)) * rng.choice([-1.0, 1.0], (d, d)), 0.0)
    causes = {c: sorted(rng.choice(d, causes_per_fault, replace=False).tolist())
              for c in range(1, n_faults + 1)}
    counts = [n_normal] + [n_per_fault] * n_faults
    labels = np.repeat(np.arange(n_faults + 1), counts)
    E = _noise("uniform", (len(labels), d), rng)
    for c, cols in causes.items():
        rows = labels == c
        E[np.ix_(rows, cols)] += shift * rng.choice([-1.0, 1.0], len(cols))
    X = np.zeros_like(E)
    for j in order:
        X[:, j] = X @ W[:, j] + E[:, j]
    perm = rng.permutation(len(labels))
    ds = Dataset(tuple(schema), X[perm], labels[perm])
    truth = {"W": W, "order": order, "causes": {c: [schema[i].id for i in v] for c, v in causes.items()}}
    return ds, truth
