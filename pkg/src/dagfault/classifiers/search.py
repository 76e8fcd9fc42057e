"""Uniform random hyperparameter search scored by stratified cross-validation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from ..dataset import Dataset
from .model import HYPERPARAMETER_KEYS, KINDS, ModelSpec

log = logging.getLogger(__name__)

OBJECTIVES = ("f1_macro", "bacc", "acc", "auc", "precision", "recall")

# Candidate grids spanning the shipped presets.
DEFAULT_GRIDS = {
    "knn": {"k": [1, 3, 5, 7, 9, 15], "weights": ["uniform", "distance"],
            "metric": ["manhattan", "euclidean"], "leaf_size": [20, 30, 40]},
    "mlp": {"hidden_layers": [[100], [150, 75], [250, 125, 60], [300, 150, 75]],
            "activation": ["relu"], "learning_rate": [0.001, 0.005, 0.01],
            "l2": [0.0001, 0.001], "batch_size": [64, 128]},
    "gbt": {"learning_rate": [0.05, 0.1, 0.3], "max_depth": [3, 5, 7],
            "n_estimators": [50, 100, 200], "subsample": [0.8, 0.9, 1.0],
            "min_child_weight": [1, 3, 5], "gamma": [0.0, 0.1, 0.2]},
}


def _draw(rng, candidates):
    """One value from a list (uniform) or a ``{"dist": ..., "low", "high"}`` mapping."""
    if isinstance(candidates, dict):
        kind, lo, hi = candidates["dist"], candidates["low"], candidates["high"]
        if kind == "uniform":
            return float(rng.uniform(lo, hi))
        if kind == "loguniform":
            return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
        if kind == "randint":
            return int(rng.integers(lo, hi + 1))
        raise ValueError(f"unknown distribution {kind!r}")
    return candidates[int(rng.integers(len(candidates)))]


@dataclass
class SearchSpace:
    """Per-kind candidate grids or distributions.

    ``grids`` maps a model kind to ``{hyperparameter: candidates}``; each
    candidate set is a list or a ``{"dist": "uniform"|"loguniform"|"randint",
    "low": a, "high": b}`` mapping. Hyperparameters not listed keep the
    estimator defaults.
    """

    grids: dict
    n_iter: int = 20
    objective: str = "f1_macro"
    max_retries: int = 50
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if not self.grids:
            raise ValueError("search space is empty")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        for kind, grid in self.grids.items():
            if kind not in KINDS:
                raise ValueError(f"unknown model kind {kind!r}")
            bad = sorted(set(grid) - set(HYPERPARAMETER_KEYS[kind]))
            if bad:
                raise ValueError(f"{kind}: unknown hyperparameters {bad}")
            if any(isinstance(c, list) and not c for c in grid.values()):
                raise ValueError(f"{kind}: empty candidate list")

    @classmethod
    def default(cls, kind, n_iter=20, objective="f1_macro"):
        return cls({kind: DEFAULT_GRIDS[kind]}, n_iter, objective)

    def size(self):
        """Number of distinct specs, or ``inf`` when a distribution is continuous."""
        total = 0
        for grid in self.grids.values():
            n = 1
            for c in grid.values():
                n *= len(c) if isinstance(c, list) else math.inf
            total += n
        return total

    def sample(self, rng) -> ModelSpec:
        kinds = sorted(self.grids)
        kind = kinds[int(rng.integers(len(kinds)))]
        grid = self.grids[kind]
        hp = dict(self.fixed.get(kind, {}))
        hp.update({key: _draw(rng, grid[key]) for key in sorted(grid)})
        return ModelSpec(kind, hp)

    def draw(self, seed) -> list[ModelSpec]:
        """Up to ``n_iter`` distinct specs; duplicates are redrawn up to ``max_retries`` times each."""
        rng = np.random.default_rng(seed)
        seen, specs = set(), []
        for _ in range(self.n_iter):
            for _ in range(self.max_retries + 1):
                spec = self.sample(rng)
                if spec.key() not in seen:
                    seen.add(spec.key())
                    specs.append(spec)
                    break
            if len(seen) >= self.size():
                break
        return specs


def candidate_seed(seed, index) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _score(spec, train, k, policy, seed, objective):
    from ..evaluation import cross_validate

    try:
        summary = cross_validate(spec, train, k=k, plan=policy, seed=seed)
    except Exception as err:  # a failing candidate must not sink the search
        log.warning("candidate %s failed: %s", spec.key(), err)
        return -math.inf
    return summary.mean["f1" if objective == "f1_macro" else objective]


def random_search(space: SearchSpace, train: Dataset, k: int = 5, seed: int = 0, policy=None,
                  n_jobs: int = 1):
    """Sample candidates from ``space`` and rank them by mean CV objective.

    Candidate ``i`` trains with the sub-seed ``SeedSequence([seed, i])``; all
    candidates share the folds drawn from ``seed``, so serial and parallel
    runs rank identically. Ties go to the earlier candidate. Returns ``(best, table)`` with ``table`` a list
    of ``(spec, score)`` in draw order.
    """
    specs = [s.with_seed(candidate_seed(seed, i)) for i, s in enumerate(space.draw(seed))]
    jobs = (delayed(_score)(s, train, k, policy, seed, space.objective) for s in specs)
    scores = list(Parallel(n_jobs=n_jobs)(jobs))
    table = list(zip(specs, scores))
    best = max(range(len(table)), key=lambda i: (scores[i], -i))
    log.info("random search: best %s score %.4f", specs[best].key(), scores[best])
    return specs[best], table
