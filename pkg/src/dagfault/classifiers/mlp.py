import numpy as np

from ..exceptions import NonFiniteLoss
from ._base import ProbaClassifier, softmax

ACTIVATIONS = {
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(float)),
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "logistic": (lambda z: 1.0 / (1.0 + np.exp(-z)), lambda z, a: a * (1.0 - a)),
    "identity": (lambda z: z, lambda z, a: np.ones_like(z)),
}


class MLPClassifier(ProbaClassifier):
    """Feed-forward network trained by plain mini-batch SGD.

    Softmax output with cross-entropy loss. The L2 penalty follows the
    scikit-learn convention, ``l2 / (2 * batch) * sum(W**2)``, so preset
    values transfer. Training stops after ``max_epochs`` or once the
    held-out validation loss has not improved for ``patience`` epochs; the
    best weights seen are kept.
    """

    def __init__(self, hidden_layers=(100,), activation="relu", learning_rate=0.001, l2=0.0001,
                 batch_size=64, max_epochs=200, patience=10, validation_fraction=0.1,
                 tol=1e-4, random_state=0):
        self.hidden_layers = hidden_layers
        self.activation = activation
        self.learning_rate = learning_rate
        self.l2 = l2
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.tol = tol
        self.random_state = random_state

    # -- network ------------------------------------------------------

    def _init_weights(self, n_in, n_out, rng):
        sizes = [n_in, *map(int, self.hidden_layers), n_out]
        factor = 2.0 if self.activation == "logistic" else 6.0
        self.coefs_, self.intercepts_ = [], []
        for a, b in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(factor / (a + b))
            self.coefs_.append(rng.uniform(-bound, bound, (a, b)))
            self.intercepts_.append(rng.uniform(-bound, bound, b))

    def _forward(self, X):
        act = ACTIVATIONS[self.activation][0]
        zs, acts = [], [X]
        a = X
        last = len(self.coefs_) - 1
        for i, (W, b) in enumerate(zip(self.coefs_, self.intercepts_)):
            z = a @ W + b
            zs.append(z)
            a = softmax(z) if i == last else act(z)
            acts.append(a)
        return zs, acts

    def loss_and_gradients(self, X, Y):
        """Penalised mean cross-entropy and its gradients.

        ``Y`` is one-hot ``(n, n_classes)``. Returns ``(loss, dW, db)`` with
        lists aligned to ``coefs_`` / ``intercepts_``.
        """
        n = X.shape[0]
        deriv = ACTIVATIONS[self.activation][1]
        zs, acts = self._forward(X)
        P = acts[-1]
        loss = -np.sum(Y * np.log(np.clip(P, 1e-300, None))) / n
        loss += 0.5 * self.l2 / n * sum(np.sum(W * W) for W in self.coefs_)
        dW = [None] * len(self.coefs_)
        db = [None] * len(self.coefs_)
        delta = (P - Y) / n
        for i in range(len(self.coefs_) - 1, -1, -1):
            dW[i] = acts[i].T @ delta + self.l2 / n * self.coefs_[i]
            db[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.coefs_[i].T) * deriv(zs[i - 1], acts[i])
        return loss, dW, db

    def _loss(self, X, Y):
        P = self._forward(X)[1][-1]
        n = X.shape[0]
        loss = -np.sum(Y * np.log(np.clip(P, 1e-300, None))) / n
        return loss + 0.5 * self.l2 / n * sum(np.sum(W * W) for W in self.coefs_)

    # -- estimator API ------------------------------------------------

    def fit(self, X, y):
        X, y_enc = self._validate_fit(X, y)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        rng = np.random.default_rng(self.random_state)
        n_cls = len(self.classes_)
        Y = np.eye(n_cls)[y_enc]
        self._init_weights(X.shape[1], n_cls, rng)

        n = X.shape[0]
        n_val = int(round(n * self.validation_fraction)) if self.validation_fraction else 0
        if n_val >= 1 and n - n_val >= 1:
            perm = rng.permutation(n)
            val, tr = perm[:n_val], perm[n_val:]
            Xv, Yv = X[val], Y[val]
            X, Y = X[tr], Y[tr]
        else:
            Xv = Yv = None

        best = np.inf
        best_weights = None
        stale = 0
        self.loss_curve_ = []
        self.validation_curve_ = []
        bs = max(1, min(int(self.batch_size), X.shape[0]))
        for epoch in range(int(self.max_epochs)):
            order = rng.permutation(X.shape[0])
            total = 0.0
            for start in range(0, X.shape[0], bs):
                sl = order[start:start + bs]
                loss, dW, db = self.loss_and_gradients(X[sl], Y[sl])
                if not np.isfinite(loss):
                    raise NonFiniteLoss(epoch)
                total += loss * len(sl)
                for i in range(len(self.coefs_)):
                    self.coefs_[i] -= self.learning_rate * dW[i]
                    self.intercepts_[i] -= self.learning_rate * db[i]
            self.loss_curve_.append(total / X.shape[0])
            monitor = self._loss(Xv, Yv) if Xv is not None else self.loss_curve_[-1]
            if not np.isfinite(monitor):
                raise NonFiniteLoss(epoch)
            self.validation_curve_.append(monitor)
            if monitor < best - self.tol:
                best = monitor
                stale = 0
                best_weights = ([W.copy() for W in self.coefs_], [b.copy() for b in self.intercepts_])
            else:
                stale += 1
                if stale >= self.patience:
                    break
        if best_weights is not None:
            self.coefs_, self.intercepts_ = best_weights
        self.n_epochs_ = len(self.loss_curve_)
        return self

    def _proba(self, X):
        return self._forward(X)[1][-1]

    def _get_arrays(self):
        out = {}
        for i, (W, b) in enumerate(zip(self.coefs_, self.intercepts_)):
            out[f"W{i}"] = W
            out[f"b{i}"] = b
        return out

    def _set_arrays(self, arrays):
        n = sum(1 for k in arrays if k.startswith("W"))
        self.coefs_ = [arrays[f"W{i}"] for i in range(n)]
        self.intercepts_ = [arrays[f"b{i}"] for i in range(n)]
