"""Uniform fit/predict interface over the three classifier families."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

import numpy as np

from ..dataset import Dataset, Scaler
from ..exceptions import SingleClassTrainingSet
from .gbt import GBTClassifier
from .knn import KNNClassifier
from .mlp import MLPClassifier

KINDS = ("knn", "mlp", "gbt")

HYPERPARAMETER_KEYS = {
    "knn": ("k", "weights", "metric", "p", "leaf_size"),
    "mlp": ("hidden_layers", "activation", "learning_rate", "l2", "batch_size", "max_epochs"),
    "gbt": ("learning_rate", "max_depth", "n_estimators", "subsample", "min_child_weight", "gamma"),
}

PRESET_FILES = {"mlp": "mlp_presets.json", "gbt": "gbt_presets.json", "knn": "knn_presets.json"}


def _canonical(value):
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        hp = {k: _canonical(v) for k, v in dict(self.hyperparameters).items()}
        bad = sorted(set(hp) - set(HYPERPARAMETER_KEYS[self.kind]))
        if bad:
            raise ValueError(f"{self.kind}: unknown hyperparameters {bad}")
        object.__setattr__(self, "hyperparameters", hp)

    def key(self) -> str:
        """Seed-independent identity used to deduplicate search candidates."""
        return json.dumps([self.kind, self.hyperparameters], sort_keys=True)

    def with_seed(self, seed) -> "ModelSpec":
        return ModelSpec(self.kind, self.hyperparameters, int(seed))

    def to_dict(self):
        return {"kind": self.kind, "hyperparameters": dict(sorted(self.hyperparameters.items())),
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], d.get("hyperparameters", {}), int(d.get("seed", 0)))


def load_presets(kind: str) -> dict[int, dict]:
    text = resources.files("dagfault.data").joinpath(PRESET_FILES[kind]).read_text("utf-8")
    return {int(n): hp for n, hp in json.loads(text)["by_n_variables"].items()}


def preset(kind: str, n_variables: int, seed: int = 0) -> ModelSpec:
    """Shipped hyperparameters for ``kind`` at the nearest tabulated width."""
    table = load_presets(kind)
    n = min(table, key=lambda m: (abs(m - n_variables), m))
    return ModelSpec(kind, table[n], seed)


def make_estimator(spec: ModelSpec):
    hp = dict(spec.hyperparameters)
    if spec.kind == "knn":
        if "k" in hp:
            hp["n_neighbors"] = hp.pop("k")
        return KNNClassifier(**hp)
    if spec.kind == "mlp":
        if "hidden_layers" in hp:
            hp["hidden_layers"] = tuple(hp["hidden_layers"])
        return MLPClassifier(random_state=spec.seed, **hp)
    return GBTClassifier(random_state=spec.seed, **hp)


@dataclass
class TrainedModel:
    """Fitted estimator plus the scaler applied to its training inputs."""

    spec: ModelSpec
    scaler: Scaler
    estimator: Any
    feature_ids: list = field(default_factory=list)

    @property
    def classes(self):
        return self.estimator.classes_

    @property
    def n_features(self):
        return self.scaler.n_features_in_

    def predict_proba(self, X):
        return self.estimator.predict_proba(self.scaler.transform(_matrix(X)))

    def predict(self, X):
        return self.estimator.predict(self.scaler.transform(_matrix(X)))

    def summary(self) -> dict:
        """JSON-friendly description: hyperparameters and parameter shapes."""
        return {
            "spec": self.spec.to_dict(),
            "classes": [int(c) for c in self.classes],
            "feature_ids": list(self.feature_ids),
            "parameter_shapes": {k: list(np.shape(v)) for k, v in self.estimator._get_arrays().items()},
        }


def _matrix(X):
    return X.values if isinstance(X, Dataset) else X


def fit(spec: ModelSpec, train: Dataset) -> TrainedModel:
    if train.n_samples == 0:
        raise ValueError("empty training set")
    if len(train.classes) < 2:
        raise SingleClassTrainingSet(f"training labels contain only class {train.classes[0]}")
    scaler = Scaler().fit(train.values)
    est = make_estimator(spec).fit(scaler.transform(train.values), train.labels)
    return TrainedModel(spec, scaler, est, train.ids)


def predict(model: TrainedModel, X):
    return model.predict(X)


def predict_proba(model: TrainedModel, X):
    return model.predict_proba(X)
