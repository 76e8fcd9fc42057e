"""KNN, MLP and gradient-boosted-tree classifiers behind one interface."""

from .gbt import GBTClassifier
from .knn import KNNClassifier
from .mlp import MLPClassifier
from .model import KINDS, ModelSpec, TrainedModel, fit, load_presets, make_estimator, predict, predict_proba, preset
from .search import SearchSpace, random_search
from .serialize import load, save

__all__ = [
    "GBTClassifier", "KNNClassifier", "MLPClassifier", "KINDS", "ModelSpec", "TrainedModel", "fit",
    "load_presets", "make_estimator", "predict", "predict_proba", "preset", "SearchSpace",
    "random_search", "load", "save",
]
