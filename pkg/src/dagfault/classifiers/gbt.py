"""Second-order gradient boosting with exact greedy split search.

One regression tree per class per round on the softmax cross-entropy
gradients. Leaf weight ``-G / (H + reg_lambda)``; split gain
``0.5 * [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)] - gamma``.
"""

from dataclasses import dataclass

import numpy as np

from ._base import ProbaClassifier, softmax

HESS_FLOOR = 1e-16


@dataclass
class Tree:
    """Flat binary tree. ``feature == -1`` marks a leaf; ``x < threshold`` goes left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def depth(self):
        def walk(node):
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))
        return walk(0)

    def apply(self, X):
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                return node
            rows = np.flatnonzero(inner)
            go_left = X[rows, feat[rows]] < self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def predict(self, X):
        return self.value[self.apply(X)]


def best_split(xs, gs, hs, reg_lambda, gamma, min_child_weight):
    """Exact greedy search over presorted columns.

    ``xs``, ``gs``, ``hs`` are ``(n_features, m)`` with each row sorted by
    feature value. Returns ``(gain, feature, position)`` where the split goes
    between sorted positions ``position`` and ``position + 1``; ``None`` if
    no admissible split has positive gain.
    """
    m = xs.shape[1]
    if m < 2:
        return None
    GL = np.cumsum(gs, axis=1)[:, :-1]
    HL = np.cumsum(hs, axis=1)[:, :-1]
    G = gs.sum(axis=1, keepdims=True)
    H = hs.sum(axis=1, keepdims=True)
    GR = G - GL
    HR = H - HL
    gain = 0.5 * (GL * GL / (HL + reg_lambda) + GR * GR / (HR + reg_lambda)
                  - G * G / (H + reg_lambda)) - gamma
    ok = (xs[:, :-1] < xs[:, 1:]) & (HL >= min_child_weight) & (HR >= min_child_weight)
    gain = np.where(ok, gain, -np.inf)
    flat = int(np.argmax(gain))
    f, pos = divmod(flat, m - 1)
    if not gain[f, pos] > 0:
        return None
    return float(gain[f, pos]), f, pos


def grow_tree(X, order, rows, g, h, max_depth, reg_lambda, gamma, min_child_weight):
    """Grow one tree on ``rows`` (bool mask) given presorted ``order`` ``(d, n)``."""
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        for arr in (feature, threshold, left, right, value):
            arr.append(0)
        feature[-1] = -1
        left[-1] = right[-1] = -1
        threshold[-1] = np.nan
        return len(feature) - 1

    XT = X.T
    stack = [(new_node(), rows, 0)]
    while stack:
        node, mask, depth = stack.pop()
        G, H = g[mask].sum(), h[mask].sum()
        value[node] = -G / (H + reg_lambda)
        if depth >= max_depth:
            continue
        m = int(mask.sum())
        sel = order[mask[order]].reshape(order.shape[0], m)
        xs = np.take_along_axis(XT, sel, axis=1)
        found = best_split(xs, g[sel], h[sel], reg_lambda, gamma, min_child_weight)
        if found is None:
            continue
        _, f, pos = found
        a, b = xs[f, pos], xs[f, pos + 1]
        thr = a + (b - a) / 2.0
        if not a < thr <= b:
            thr = b
        feature[node] = f
        threshold[node] = thr
        go_left = mask & (X[:, f] < thr)
        go_right = mask & ~go_left
        li, ri = new_node(), new_node()
        left[node], right[node] = li, ri
        stack.append((ri, go_right, depth + 1))
        stack.append((li, go_left, depth + 1))
    return Tree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=float),
                np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                np.array(value, dtype=float))


class GBTClassifier(ProbaClassifier):
    """Boosted regression trees on the multinomial log-loss.

    ``subsample`` draws rows without replacement once per round, shared by
    the per-class trees. With ``n_estimators=0`` every margin is zero and the
    predicted distribution is uniform.
    """

    def __init__(self, learning_rate=0.3, max_depth=6, n_estimators=100, subsample=1.0,
                 min_child_weight=1.0, gamma=0.0, reg_lambda=1.0, random_state=0):
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.n_estimators = n_estimators
        self.subsample = subsample
        self.min_child_weight = min_child_weight
        self.gamma = gamma
        self.reg_lambda = reg_lambda
        self.random_state = random_state

    def fit(self, X, y):
        X, y_enc = self._validate_fit(X, y)
        n, K = X.shape[0], len(self.classes_)
        Y = np.eye(K)[y_enc]
        rng = np.random.default_rng(self.random_state)
        order = np.argsort(X, axis=0, kind="stable").T.copy()
        F = np.zeros((n, K))
        self.trees_ = []
        self.train_loss_ = [self._logloss(F, Y)]
        n_sub = max(1, int(round(self.subsample * n)))
        for _ in range(int(self.n_estimators)):
            if n_sub < n:
                rows = np.zeros(n, dtype=bool)
                rows[rng.choice(n, n_sub, replace=False)] = True
            else:
                rows = np.ones(n, dtype=bool)
            P = softmax(F)
            round_trees = []
            for k in range(K):
                g = P[:, k] - Y[:, k]
                h = np.maximum(P[:, k] * (1.0 - P[:, k]), HESS_FLOOR)
                tree = grow_tree(X, order, rows, g, h, int(self.max_depth), self.reg_lambda,
                                 self.gamma, self.min_child_weight)
                round_trees.append(tree)
            for k, tree in enumerate(round_trees):
                F[:, k] += self.learning_rate * tree.predict(X)
            self.trees_.append(round_trees)
            self.train_loss_.append(self._logloss(F, Y))
        return self

    @staticmethod
    def _logloss(F, Y):
        P = softmax(F)
        return float(-np.mean(np.sum(Y * np.log(np.clip(P, 1e-300, None)), axis=1)))

    def _margins(self, X):
        F = np.zeros((X.shape[0], len(self.classes_)))
        for round_trees in self.trees_:
            for k, tree in enumerate(round_trees):
                F[:, k] += self.learning_rate * tree.predict(X)
        return F

    def decision_function(self, X):
        return self._margins(self._validate_predict(X))

    def _proba(self, X):
        return softmax(self._margins(X))

    def _get_arrays(self):
        K = len(self.classes_)
        flat = [t for r in self.trees_ for t in r]
        sizes = np.array([len(t.feature) for t in flat], dtype=np.int64)
        cat = lambda name, dt: (np.concatenate([getattr(t, name) for t in flat]).astype(dt)
                                if flat else np.zeros(0, dt))
        return {"n_rounds": np.array([len(self.trees_), K]), "sizes": sizes,
                "feature": cat("feature", np.int64), "threshold": cat("threshold", float),
                "left": cat("left", np.int64), "right": cat("right", np.int64),
                "value": cat("value", float)}

    def _set_arrays(self, arrays):
        n_rounds, K = (int(v) for v in arrays["n_rounds"])
        bounds = np.concatenate([[0], np.cumsum(arrays["sizes"])])
        flat = []
        for i in range(len(arrays["sizes"])):
            s = slice(bounds[i], bounds[i + 1])
            flat.append(Tree(arrays["feature"][s], arrays["threshold"][s], arrays["left"][s],
                             arrays["right"][s], arrays["value"][s]))
        self.trees_ = [flat[r * K:(r + 1) * K] for r in range(n_rounds)]
