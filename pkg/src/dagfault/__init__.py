"""Interpretable fault detection: resampling, classifiers, Shapley ranking and causal graphs."""

__version__ = "0.1.0"
