"""Two-stage class rebalancing: SMOTE oversampling, then random undersampling.

Only training partitions go through here. Output row order is canonical:
original rows first (in input order, minus undersampled ones), then synthetic
rows grouped by ascending class id.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator

from .dataset import Dataset, Scaler
from .exceptions import TargetExceedsCount, TooFewSamples

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ResamplePlan:
    """Concrete per-class targets for one rebalance call.

    ``targets`` maps class id to the row count wanted after oversampling;
    classes not listed are left alone. ``majority_target`` (if set) is the
    number of ``majority_class`` rows kept after undersampling.
    """

    smote_k: int = 5
    targets: Mapping[int, int] = field(default_factory=dict)
    majority_target: int | None = None
    seed: int = 0
    majority_class: int = 0
    standardize: bool = True

    def __post_init__(self):
        if self.smote_k < 1:
            raise ValueError("smote_k must be >= 1")
        object.__setattr__(self, "targets", {int(c): int(t) for c, t in dict(self.targets).items()})

    def to_dict(self):
        return {
            "smote_k": self.smote_k,
            "targets": {str(c): t for c, t in sorted(self.targets.items())},
            "majority_target": self.majority_target,
            "seed": self.seed,
            "majority_class": self.majority_class,
            "standardize": self.standardize,
        }


@dataclass(frozen=True)
class RebalancePolicy:
    """Ratio rule that turns observed class counts into a :class:`ResamplePlan`.

    Each minority class is oversampled to ``oversample_factor`` times the
    median minority count; the majority class is then cut to
    ``majority_factor`` times the largest post-SMOTE minority class.
    """

    smote_k: int = 5
    oversample_factor: float = 2.0
    majority_factor: float = 2.0
    majority_class: int = 0
    standardize: bool = True
    enabled: bool = True

    def plan_for(self, labels, seed: int = 0) -> ResamplePlan:
        cls, counts = np.unique(np.asarray(labels), return_counts=True)
        counts = {int(c): int(n) for c, n in zip(cls, counts)}
        if not self.enabled:
            return ResamplePlan(self.smote_k, {}, None, seed, self.majority_class, self.standardize)
        minority = {c: n for c, n in counts.items() if c != self.majority_class}
        if not minority:
            return ResamplePlan(self.smote_k, {}, None, seed, self.majority_class, self.standardize)
        goal = int(math.ceil(float(np.median(list(minority.values()))) * self.oversample_factor))
        targets = {c: max(n, goal) for c, n in minority.items() if goal > n}
        post = [targets.get(c, n) for c, n in minority.items()]
        majority_target = None
        if self.majority_class in counts:
            majority_target = min(counts[self.majority_class],
                                  int(math.ceil(max(post) * self.majority_factor)))
        return ResamplePlan(self.smote_k, targets, majority_target, seed,
                            self.majority_class, self.standardize)

    def to_dict(self):
        return {
            "smote_k": self.smote_k,
            "oversample_factor": self.oversample_factor,
            "majority_factor": self.majority_factor,
            "majority_class": self.majority_class,
            "standardize": self.standardize,
            "enabled": self.enabled,
        }


def _neighbors(Z, k):
    """Indices of the k nearest other rows of Z (Euclidean)."""
    tree = cKDTree(Z)
    _, nn = tree.query(Z, k=k + 1)
    nn = np.atleast_2d(nn)
    out = np.empty((Z.shape[0], k), dtype=np.int64)
    for i, row in enumerate(nn):
        others = row[row != i]
        out[i] = others[:k]
    return out


def smote(ds: Dataset, plan: ResamplePlan) -> Dataset:
    """Oversample the classes in ``plan.targets`` by segment interpolation.

    Every synthetic row is ``x + u*(z - x)`` with ``x`` a class member, ``z``
    one of its ``smote_k`` nearest same-class neighbours and ``u ~ U[0, 1]``.
    Neighbours are searched in standardised coordinates when
    ``plan.standardize`` is set; interpolation happens in the original space.
    """
    counts = ds.class_counts()
    todo = {}
    for c, target in sorted(plan.targets.items()):
        have = counts.get(c, 0)
        if target < have:
            raise ValueError(f"oversampling target {target} below class {c} count {have}")
        if target > have:
            if have <= plan.smote_k:
                raise TooFewSamples(c, plan.smote_k, have)
            todo[c] = target - have
    if not todo:
        return ds

    X = ds.values
    Z = Scaler().fit_transform(X) if plan.standardize else X
    new_rows, new_labels = [], []
    for c, n_new in todo.items():
        idx = np.flatnonzero(ds.labels == c)
        nn = _neighbors(Z[idx], plan.smote_k)
        rng = np.random.default_rng([plan.seed, c])
        base = rng.integers(0, len(idx), n_new)
        pick = nn[base, rng.integers(0, plan.smote_k, n_new)]
        u = rng.uniform(0.0, 1.0, n_new)[:, None]
        Xc = X[idx]
        new_rows.append(Xc[base] + u * (Xc[pick] - Xc[base]))
        new_labels.append(np.full(n_new, c, dtype=np.int64))
    values = np.vstack([X] + new_rows)
    labels = np.concatenate([ds.labels] + new_labels)
    return Dataset(ds.variables, values, labels)


def random_undersample(ds: Dataset, plan: ResamplePlan) -> Dataset:
    """Keep a uniform random subset of ``plan.majority_target`` majority rows."""
    if plan.majority_target is None:
        return ds
    maj = np.flatnonzero(ds.labels == plan.majority_class)
    if plan.majority_target > len(maj):
        raise TargetExceedsCount(
            f"majority target {plan.majority_target} exceeds {len(maj)} rows of class {plan.majority_class}")
    if plan.majority_target == len(maj):
        return ds
    rng = np.random.default_rng([plan.seed, 1_000_003])
    kept = rng.choice(maj, size=plan.majority_target, replace=False)
    mask = ds.labels != plan.majority_class
    mask[kept] = True
    return ds.take(np.flatnonzero(mask))


def rebalance(ds: Dataset, plan: ResamplePlan) -> Dataset:
    """SMOTE followed by random undersampling."""
    out = random_undersample(smote(ds, plan), plan)
    for line in format_count_report(ds, out):
        log.info(line)
    return out


def count_report(before: Dataset, after: Dataset) -> dict[int, tuple[int, int]]:
    b, a = before.class_counts(), after.class_counts()
    return {c: (b.get(c, 0), a.get(c, 0)) for c in sorted(set(b) | set(a))}


def format_count_report(before: Dataset, after: Dataset):
    return [f"class {c}: {n0} -> {n1}" for c, (n0, n1) in count_report(before, after).items()]


class SmoteUndersampler(BaseEstimator):
    """imbalanced-learn style wrapper: ``fit_resample(X, y) -> (X', y')``."""

    def __init__(self, smote_k=5, oversample_factor=2.0, majority_factor=2.0,
                 majority_class=0, random_state=0):
        self.smote_k = smote_k
        self.oversample_factor = oversample_factor
        self.majority_factor = majority_factor
        self.majority_class = majority_class
        self.random_state = random_state

    def fit_resample(self, X, y):
        ds = Dataset.from_arrays(X, y)
        policy = RebalancePolicy(self.smote_k, self.oversample_factor, self.majority_factor,
                                 self.majority_class)
        self.plan_ = policy.plan_for(ds.labels, seed=self.random_state)
        out = rebalance(ds, self.plan_)
        return np.array(out.values), np.array(out.labels)
