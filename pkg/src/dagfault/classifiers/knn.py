import numpy as np
from scipy.spatial.distance import cdist

from ._base import ProbaClassifier

_METRICS = {"manhattan": "cityblock", "cityblock": "cityblock", "euclidean": "euclidean",
            "minkowski": "minkowski", "chebyshev": "chebyshev"}


class KNNClassifier(ProbaClassifier):
    """Brute-force k-nearest-neighbour vote.

    ``metric`` names the distance; ``p`` is only read when the metric is
    ``"minkowski"``. ``leaf_size`` is accepted for preset compatibility and
    has no effect on the brute-force search.
    """

    def __init__(self, n_neighbors=5, weights="uniform", metric="manhattan", p=2, leaf_size=30):
        self.n_neighbors = n_neighbors
        self.weights = weights
        self.metric = metric
        self.p = p
        self.leaf_size = leaf_size

    def fit(self, X, y):
        X, y_enc = self._validate_fit(X, y)
        if self.metric not in _METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.weights not in ("uniform", "distance"):
            raise ValueError(f"unknown weights {self.weights!r}")
        self.X_ = X
        self.y_ = y_enc
        return self

    def kneighbors(self, X, chunk_elems=4_000_000):
        """Return ``(distances, indices)`` of the k nearest training rows.

        Equal distances are ordered by training-row index.
        """
        X = self._validate_predict(X)
        k = min(self.n_neighbors, self.X_.shape[0])
        metric = _METRICS[self.metric]
        kw = {"p": self.p} if metric == "minkowski" else {}
        step = max(1, chunk_elems // max(1, self.X_.shape[0]))
        dist = np.empty((X.shape[0], k))
        idx = np.empty((X.shape[0], k), dtype=np.int64)
        for start in range(0, X.shape[0], step):
            D = cdist(X[start:start + step], self.X_, metric=metric, **kw)
            order = np.argsort(D, axis=1, kind="stable")[:, :k]
            idx[start:start + step] = order
            dist[start:start + step] = np.take_along_axis(D, order, axis=1)
        return dist, idx

    def _proba(self, X):
        dist, idx = self.kneighbors(X)
        votes = self.y_[idx]
        if self.weights == "uniform":
            w = np.ones_like(dist)
        else:
            with np.errstate(divide="ignore"):
                w = 1.0 / dist
            exact = np.isinf(w)
            rows = exact.any(axis=1)
            w[rows] = exact[rows].astype(float)
        P = np.zeros((X.shape[0], len(self.classes_)))
        np.add.at(P, (np.repeat(np.arange(X.shape[0]), votes.shape[1]), votes.ravel()), w.ravel())
        return P

    def _get_arrays(self):
        return {"X": self.X_, "y": self.y_}

    def _set_arrays(self, arrays):
        self.X_ = arrays["X"]
        self.y_ = arrays["y"].astype(np.int64)
