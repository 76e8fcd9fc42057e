"""Shared input validation for the three classifier families."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import SingleClassTrainingSet, WidthMismatch


class ProbaClassifier(ClassifierMixin, BaseEstimator):
    """Base for classifiers whose ``predict`` is the argmax of ``predict_proba``.

    ``classes_`` is sorted ascending, so ``argmax`` breaks ties toward the
    lowest class id.
    """

    def _validate_fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        classes, y_enc = np.unique(y, return_inverse=True)
        if len(classes) < 2:
            raise SingleClassTrainingSet(f"training labels contain only class {classes[0]}")
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        return X, y_enc

    def _validate_predict(self, X):
        check_is_fitted(self, "classes_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise WidthMismatch(self.n_features_in_, X.shape[1])
        return X

    def predict_proba(self, X):
        P = self._proba(self._validate_predict(X))
        return P / P.sum(axis=1, keepdims=True)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


def softmax(F):
    F = F - F.max(axis=1, keepdims=True)
    E = np.exp(F)
    return E / E.sum(axis=1, keepdims=True)
