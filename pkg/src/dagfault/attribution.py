"""Kernel Shapley attributions, global feature ranking and top-m subsets.

Features left out of a coalition are filled from background rows and the
model output is averaged over the background (interventional masking). Up to
``exact_threshold`` features every coalition is enumerated; above it a
budget of coalitions is drawn from the Shapley kernel. In both cases the
attributions solve the kernel-weighted least-squares problem subject to the
efficiency constraint, which at full enumeration reproduces the Shapley
values exactly.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dataset import Dataset, VariableSchema, _class_indices
from .exceptions import BudgetTooSmall, EmptyBackground, MTooLarge, WidthMismatch

log = logging.getLogger(__name__)

EVAL_CHUNK_ROWS = 1 << 18


@dataclass(frozen=True)
class CoalitionBudget:
    """How many coalitions to evaluate per explained row.

    ``n_coalitions`` counts the empty and full coalitions, so it must be at
    least ``M + 2`` in sampled mode.
    """

    n_coalitions: int = 2048
    exact_threshold: int = 15
    seed: int = 0


@dataclass
class ShapVector:
    values: np.ndarray
    base_value: float
    output: float
    target_class: int


@dataclass
class ShapMatrix:
    values: np.ndarray  # (n_explained, n_features), signed
    base_value: np.ndarray  # per-class mean model output over the background
    feature_ids: list
    explained_class: np.ndarray  # class explained in each row
    output: np.ndarray  # explained class output per row
    classes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "explained_class", "output", "base_value", *self.feature_ids])
            base = self.base_for_rows()
            for i, row in enumerate(self.values):
                w.writerow([i, int(self.explained_class[i]), repr(float(self.output[i])),
                            repr(float(base[i])), *(repr(float(v)) for v in row)])

    def base_for_rows(self):
        pos = np.searchsorted(self.classes, self.explained_class)
        return self.base_value[pos]


# -- model output ----------------------------------------------------------

def _model_output(model):
    """Return ``(f, classes)`` where ``f(X)`` is an ``(n, K)`` output matrix.

    Accepts a fitted model with ``predict_proba`` or a plain callable
    returning one output per row (treated as a single class 0).
    """
    if hasattr(model, "predict_proba"):
        return model.predict_proba, np.asarray(model.classes if hasattr(model, "classes")
                                               else model.classes_)

    def f(X):
        return np.asarray(model(X), dtype=float).reshape(len(X), -1)
    return f, np.array([0])


def _coalition_values(f, col, x, background, Z):
    """Mean of ``f(.)[:, col]`` over the background for each coalition row of ``Z``."""
    nb, M = background.shape
    out = np.empty(len(Z))
    step = max(1, EVAL_CHUNK_ROWS // nb)
    for start in range(0, len(Z), step):
        z = Z[start:start + step]
        X = np.where(z[:, None, :], x[None, None, :], background[None, :, :]).reshape(-1, M)
        out[start:start + step] = f(X)[:, col].reshape(len(z), nb).mean(axis=1)
    return out


def _all_coalitions(M):
    codes = np.arange(1, 2 ** M - 1, dtype=np.int64)
    return ((codes[:, None] >> np.arange(M)) & 1).astype(bool)


def _kernel_weight(M, s):
    return (M - 1) / (math.comb(M, s) * s * (M - s))


def _sample_coalitions(M, n, rng):
    """``n`` coalitions drawn from the Shapley kernel, complements paired."""
    sizes = np.arange(1, M)
    p = np.array([(M - 1) / (s * (M - s)) for s in sizes])
    p /= p.sum()
    Z = np.zeros((n, M), dtype=bool)
    i = 0
    while i < n:
        s = int(rng.choice(sizes, p=p))
        members = rng.choice(M, s, replace=False)
        Z[i, members] = True
        i += 1
        if i < n:
            Z[i] = ~Z[i - 1]
            i += 1
    return Z


def _solve_constrained(Z, w, y, delta):
    """Weighted least squares for ``y ~ Z phi`` subject to ``sum(phi) = delta``."""
    M = Z.shape[1]
    Zf = Z.astype(float)
    A = Zf[:, :-1] - Zf[:, [-1]]
    b = y - Zf[:, -1] * delta
    sw = np.sqrt(w)
    sol, *_ = np.linalg.lstsq(A * sw[:, None], b * sw, rcond=None)
    phi = np.empty(M)
    phi[:-1] = sol
    phi[-1] = delta - sol.sum()
    return phi


def _explain_row(f, col, x, background, budget, rng):
    M = background.shape[1]
    v_empty = float(f(background)[:, col].mean())
    v_full = float(f(x[None, :])[0, col])
    delta = v_full - v_empty
    if M == 1:
        return np.array([delta]), v_empty, v_full
    if M <= budget.exact_threshold:
        Z = _all_coalitions(M)
        sizes = Z.sum(axis=1)
        w = np.array([_kernel_weight(M, int(s)) for s in sizes])
    else:
        if budget.n_coalitions < M + 2:
            raise BudgetTooSmall(budget.n_coalitions, M + 2)
        Z = _sample_coalitions(M, budget.n_coalitions - 2, rng)
        Z, w = np.unique(Z, axis=0, return_counts=True)
        w = w.astype(float)
    y = _coalition_values(f, col, x, background, Z) - v_empty
    return _solve_constrained(Z, w, y, delta), v_empty, v_full


def row_rng(seed, x):
    """Stream keyed by the seed and the row's bytes, so equal rows get equal draws."""
    words = np.ascontiguousarray(x, dtype=np.float64).view(np.uint32)
    return np.random.default_rng(np.concatenate([[int(seed)], words]).astype(np.uint64))


def _background_matrix(background):
    bg = background.values if isinstance(background, Dataset) else np.asarray(background, dtype=float)
    if bg.ndim != 2 or bg.shape[0] == 0:
        raise EmptyBackground("background has no rows")
    return bg


def shap_explain(model, x, background, target_class=None, budget: CoalitionBudget | None = None,
                 rng=None) -> ShapVector:
    """Shapley attribution of one row's output for ``target_class``.

    ``target_class`` defaults to the model's predicted class for ``x``.
    """
    budget = budget or CoalitionBudget()
    bg = _background_matrix(background)
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != bg.shape[1]:
        raise WidthMismatch(bg.shape[1], x.shape[0])
    f, classes = _model_output(model)
    if target_class is None:
        col = int(np.argmax(f(x[None, :])[0]))
    else:
        col = int(np.flatnonzero(classes == target_class)[0])
    rng = rng if rng is not None else row_rng(budget.seed, x)
    phi, base, out = _explain_row(f, col, x, bg, budget, rng)
    return ShapVector(phi, base, out, int(classes[col]))


def _explain_block(model, rows, bg, budget, target_class):
    f, classes = _model_output(model)
    P = f(rows)
    cols = (np.argmax(P, axis=1) if target_class is None
            else np.full(len(rows), int(np.flatnonzero(classes == target_class)[0])))
    out = []
    for x, c in zip(rows, cols):
        phi, _, v = _explain_row(f, int(c), x, bg, budget, row_rng(budget.seed, x))
        out.append((phi, int(classes[c]), v))
    return out


def shap_matrix(model, sample, background, budget: CoalitionBudget | None = None, target_class=None,
                n_jobs: int = 1, feature_ids=None) -> ShapMatrix:
    """Explain every row of ``sample`` (its predicted class unless ``target_class`` is set)."""
    budget = budget or CoalitionBudget()
    bg = _background_matrix(background)
    X = sample.values if isinstance(sample, Dataset) else np.asarray(sample, dtype=float)
    if X.shape[1] != bg.shape[1]:
        raise WidthMismatch(bg.shape[1], X.shape[1])
    if feature_ids is None:
        feature_ids = sample.ids if isinstance(sample, Dataset) else [f"x{j}" for j in range(X.shape[1])]
    f, classes = _model_output(model)
    base = f(bg).mean(axis=0)
    n = X.shape[0]
    blocks = np.array_split(np.arange(n), max(1, min(n, 4 * max(1, n_jobs))))
    jobs = (delayed(_explain_block)(model, X[b], bg, budget, target_class) for b in blocks if len(b))
    rows = [r for block in Parallel(n_jobs=n_jobs)(jobs) for r in block]
    values = np.array([r[0] for r in rows]).reshape(n, X.shape[1])
    return ShapMatrix(values, base, list(feature_ids), np.array([r[1] for r in rows], dtype=np.int64),
                      np.array([r[2] for r in rows]), classes)


def sample_background(ds: Dataset, size: int = 200, seed: int = 0) -> Dataset:
    """Class-stratified subsample of at most ``size`` rows (largest-remainder quotas)."""
    if ds.n_samples <= size:
        return ds
    per_class = _class_indices(ds.labels, seed)
    counts = {c: len(v) for c, v in per_class.items()}
    exact = {c: size * n / ds.n_samples for c, n in counts.items()}
    quota = {c: int(math.floor(e)) for c, e in exact.items()}
    left = size - sum(quota.values())
    for c in sorted(exact, key=lambda c: (-(exact[c] - quota[c]), c))[:left]:
        quota[c] += 1
    rows = np.sort(np.concatenate([np.array(per_class[c][:quota[c]], dtype=np.int64) for c in per_class]))
    return ds.take(rows)


# -- ranking ---------------------------------------------------------------

@dataclass(frozen=True)
class Ranking:
    items: tuple  # ((feature_id, importance), ...) most important first

    @property
    def ids(self):
        return [i for i, _ in self.items]

    @property
    def importances(self):
        return np.array([v for _, v in self.items])

    def to_dict(self):
        return {"ranking": [{"id": i, "importance": v} for i, v in self.items]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def rank_features(sm: ShapMatrix) -> Ranking:
    """Order features by mean ``|phi|`` over explained rows; ties by feature id."""
    imp = np.abs(np.asarray(sm.values, dtype=float)).mean(axis=0)
    order = sorted(range(len(imp)), key=lambda j: (-imp[j], sm.feature_ids[j]))
    return Ranking(tuple((sm.feature_ids[j], float(imp[j])) for j in order))


def select_top(r: Ranking, m: int, schema=None) -> VariableSchema:
    """The ``m`` highest-ranked variables, in ranking order, with schema metadata when given."""
    if m > len(r.items):
        raise MTooLarge(f"m={m} exceeds {len(r.items)} ranked features")
    if m < 1:
        raise ValueError("m must be >= 1")
    ids = r.ids[:m]
    if schema is None:
        return VariableSchema.generic(ids)
    return VariableSchema([schema[schema.index(i)] for i in ids], name=f"{schema.name}-top{m}")


class ShapSelector(TransformerMixin, BaseEstimator):
    """Keep the ``n_features`` columns with the largest mean ``|phi|`` of ``model``.

    ``model`` must already be fitted; ``fit`` explains up to ``n_explain``
    rows of ``X`` against a background of up to ``n_background`` rows.
    """

    def __init__(self, model=None, n_features=10, n_background=100, n_explain=100,
                 budget=None, random_state=0):
        self.model = model
        self.n_features = n_features
        self.n_background = n_background
        self.n_explain = n_explain
        self.budget = budget
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        rng = np.random.default_rng(self.random_state)
        bg = X[np.sort(rng.choice(len(X), min(self.n_background, len(X)), replace=False))]
        rows = X[np.sort(rng.choice(len(X), min(self.n_explain, len(X)), replace=False))]
        ids = [f"x{j}" for j in range(X.shape[1])]
        budget = self.budget or CoalitionBudget(seed=self.random_state)
        self.ranking_ = rank_features(shap_matrix(self.model, rows, bg, budget, feature_ids=ids))
        self.support_ = np.array(sorted(int(i[1:]) for i in self.ranking_.ids[:self.n_features]))
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "support_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise WidthMismatch(self.n_features_in_, X.shape[1])
        return X[:, self.support_]
