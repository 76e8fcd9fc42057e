"""Causal structure learning: PC, FCI, RFCI, ICA-LiNGAM and NOTEARS."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .citest import CITestResult, DSeparationOracle, FisherZ, d_separated, fisher_z
from .fci import fci, rfci
from .graph import ARROW, CIRCLE, NONE, TAIL, MixedGraph, topological_order
from .lingam import ICALiNGAM, LingamConfig, ica_lingam
from .notears import NOTEARS, NotearsConfig, acyclicity_h, notears
from .pc import pc
from .skeleton import ConstraintConfig

log = logging.getLogger(__name__)

ALGORITHMS = ("pc", "fci", "rfci", "lingam", "notears")


@dataclass
class SuiteResult:
    graphs: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    ci_tests: dict = field(default_factory=dict)


def standardize(X):
    X = np.asarray(X, dtype=float)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return (X - X.mean(axis=0)) / sd


def run_suite(data, vertices=None, algorithms=ALGORITHMS, alpha=0.05, max_cond_size=3, lambda1=0.05,
              w_threshold=0.3, lingam_threshold=0.05, seed=0, scale=True) -> SuiteResult:
    """Run each requested algorithm on the same (standardized) matrix.

    A failing algorithm is recorded in ``failures`` and the others still run.
    """
    X = standardize(data) if scale else np.asarray(data, dtype=float)
    vertices = list(vertices) if vertices is not None else [f"x{i}" for i in range(X.shape[1])]
    ccfg = ConstraintConfig(alpha, max_cond_size)
    out = SuiteResult()
    for name in algorithms:
        try:
            if name in ("pc", "fci", "rfci"):
                test = FisherZ(X, alpha)
                g = {"pc": pc, "fci": fci, "rfci": rfci}[name](cfg=ccfg, vertices=vertices, test=test)
                out.ci_tests[name] = test.n_tests
            elif name == "lingam":
                g = ica_lingam(X, LingamConfig(prune_threshold=lingam_threshold, seed=seed), vertices)
            elif name == "notears":
                g = notears(X, cfg=NotearsConfig(lambda1=lambda1, w_threshold=w_threshold), vertices=vertices)
            else:
                raise ValueError(f"unknown algorithm {name!r}")
        except Exception as exc:  # recorded, not fatal
            log.warning("%s failed: %s", name, exc)
            out.failures[name] = f"{type(exc).__name__}: {exc}"
            continue
        out.graphs[name] = g
    return out


__all__ = [
    "ALGORITHMS", "ARROW", "CIRCLE", "NONE", "TAIL", "CITestResult", "ConstraintConfig",
    "DSeparationOracle", "FisherZ", "ICALiNGAM", "LingamConfig", "MixedGraph", "NOTEARS",
    "NotearsConfig", "SuiteResult", "acyclicity_h", "d_separated", "fci", "fisher_z", "ica_lingam",
    "notears", "pc", "rfci", "run_suite", "standardize", "topological_order",
]
