"""Classification metrics and the stratified cross-validation harness.

Binary problems use the positive-class formulas directly (positive = the
larger class id). With more than two classes, precision, recall and F1 are
macro-averaged one-vs-rest, balanced accuracy is the mean per-class recall,
and AUC is the macro one-vs-rest Mann-Whitney statistic.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import rankdata

from .dataset import Dataset, stratified_kfold
from .exceptions import MetricWarning, ScoresMissingForAUC, UnknownLabel
from .resampling import RebalancePolicy, ResamplePlan, rebalance

log = logging.getLogger(__name__)

METRICS = ("acc", "bacc", "precision", "recall", "f1", "auc")


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, cols = predicted class
    classes: tuple

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def one_vs_rest(self, i):
        """(TP, TN, FP, FN) of class index ``i``."""
        c = self.counts
        tp = c[i, i]
        fn = c[i].sum() - tp
        fp = c[:, i].sum() - tp
        tn = c.sum() - tp - fn - fp
        return int(tp), int(tn), int(fp), int(fn)


def confusion(y_true, y_pred, classes=None) -> ConfusionMatrix:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred differ in length")
    if classes is None:
        classes = np.unique(np.concatenate([y_true, y_pred]))
    classes = np.asarray(classes)
    pos = {c.item() if hasattr(c, "item") else c: i for i, c in enumerate(classes)}
    try:
        ti = np.array([pos[v] for v in y_true.tolist()], dtype=np.int64)
        pi = np.array([pos[v] for v in y_pred.tolist()], dtype=np.int64)
    except KeyError as err:
        raise UnknownLabel(f"label {err.args[0]!r} not in class set") from None
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    np.add.at(counts, (ti, pi), 1)
    return ConfusionMatrix(counts, tuple(c.item() if hasattr(c, "item") else c for c in classes))


@dataclass
class MetricSet:
    acc: float
    bacc: float
    precision: float
    recall: float
    f1: float
    auc: float | None = None
    flags: list = field(default_factory=list)

    def as_dict(self):
        return {m: getattr(self, m) for m in METRICS}


def _ratio(num, den, flags, label):
    if den == 0:
        flags.append(label)
        return 0.0
    return num / den


def _f1(p, r):
    return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)


def binary_auc(y_pos, scores) -> float:
    """Mann-Whitney AUC: fraction of (positive, negative) pairs ranked correctly, ties half."""
    y_pos = np.asarray(y_pos, dtype=bool)
    n_pos = int(y_pos.sum())
    n_neg = y_pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative samples")
    ranks = rankdata(scores, method="average")
    return float((ranks[y_pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def compute_metrics(cm: ConfusionMatrix, scores=None, y_true=None, average="auto",
                    with_auc=True) -> MetricSet:
    """Six metrics from a confusion matrix (and scores for AUC).

    ``scores`` is ``(n, n_classes)`` aligned with ``cm.classes`` (a 1-D
    positive-class score is accepted for binary problems) and must come with
    ``y_true``. Missing scores raise :class:`ScoresMissingForAUC` unless
    ``with_auc=False``, in which case ``auc`` is ``None``. ``average`` is ``"auto"``
    (binary for two classes, macro otherwise), ``"binary"`` or ``"macro"``.
    Zero denominators yield 0 for that term and a :class:`MetricWarning`.
    """
    if cm.total <= 0:
        raise ValueError("confusion matrix is empty")
    K = len(cm.classes)
    if average == "auto":
        average = "binary" if K == 2 else "macro"
    if average == "binary" and K != 2:
        raise ValueError("binary averaging needs exactly two classes")
    flags: list[str] = []
    acc = float(np.trace(cm.counts)) / cm.total

    if average == "binary":
        tp, tn, fp, fn = cm.one_vs_rest(1)
        recall = _ratio(tp, tp + fn, flags, "recall")
        precision = _ratio(tp, tp + fp, flags, "precision")
        specificity = _ratio(tn, tn + fp, flags, "specificity")
        f1 = _f1(precision, recall)
        bacc = (recall + specificity) / 2.0
    else:
        recalls, precisions, f1s = [], [], []
        for i, c in enumerate(cm.classes):
            tp, tn, fp, fn = cm.one_vs_rest(i)
            r = _ratio(tp, tp + fn, flags, f"recall[{c}]")
            p = _ratio(tp, tp + fp, flags, f"precision[{c}]")
            recalls.append(r)
            precisions.append(p)
            f1s.append(_f1(p, r))
        recall = float(np.mean(recalls))
        precision = float(np.mean(precisions))
        f1 = float(np.mean(f1s))
        bacc = recall

    auc = None
    if with_auc:
        if scores is None or y_true is None:
            raise ScoresMissingForAUC("AUC needs scores and the matching true labels")
        auc = _auc(cm, np.asarray(scores, dtype=float), np.asarray(y_true), average, flags)
    if flags:
        warnings.warn(f"zero denominators set to 0: {', '.join(flags)}", MetricWarning, stacklevel=2)
    return MetricSet(acc, bacc, precision, recall, f1, auc, flags)


def _auc(cm, scores, y_true, average, flags):
    if average == "binary":
        s = scores if scores.ndim == 1 else scores[:, 1]
        y_pos = y_true == cm.classes[1]
        if y_pos.all() or not y_pos.any():
            flags.append("auc")
            return 0.0
        return binary_auc(y_pos, s)
    if scores.ndim != 2 or scores.shape[1] != len(cm.classes):
        raise ValueError("scores must have one column per class")
    vals = []
    for i, c in enumerate(cm.classes):
        y_pos = y_true == c
        if y_pos.all() or not y_pos.any():
            flags.append(f"auc[{c}]")
            continue
        vals.append(binary_auc(y_pos, scores[:, i]))
    if not vals:
        return 0.0
    return float(np.mean(vals))


def f1_macro(y_true, y_pred) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MetricWarning)
        return compute_metrics(confusion(y_true, y_pred), average="macro", with_auc=False).f1


def evaluate(y_true, y_pred, scores=None, classes=None, average="auto") -> MetricSet:
    cm = confusion(y_true, y_pred, classes)
    return compute_metrics(cm, scores, y_true, average, with_auc=scores is not None)


# -- cross-validation -------------------------------------------------------

@dataclass
class MetricSummary:
    mean: dict
    std: dict
    n_folds: int
    folds: list = field(default_factory=list)

    @classmethod
    def from_folds(cls, folds: list[MetricSet]) -> "MetricSummary":
        mean, std = {}, {}
        for m in METRICS:
            vals = [getattr(f, m) for f in folds]
            if any(v is None for v in vals):
                continue
            arr = np.array(vals, dtype=float)
            mean[m] = float(arr.mean())
            std[m] = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        return cls(mean, std, len(folds), [f.as_dict() for f in folds])

    def to_dict(self):
        return {"n_folds": self.n_folds, "mean": self.mean, "std": self.std, "folds": self.folds}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def format(self, metric) -> str:
        return f"{self.mean[metric]:.3f}±{self.std[metric]:.3f}"


def collapse_binary(labels, normal_class=0):
    return (np.asarray(labels) != normal_class).astype(np.int64)


def evaluate_model(model, ds: Dataset, mode="macro", classes=None) -> MetricSet:
    """Metrics of a fitted model on ``ds``.

    ``mode="binary"`` collapses labels to fault (1) vs normal (0) and scores
    each row by ``1 - P(normal)``.
    """
    P = model.predict_proba(ds.values)
    model_classes = np.asarray(model.classes)
    if classes is None:
        classes = np.union1d(model_classes, ds.classes)
    classes = np.asarray(classes)
    full = np.zeros((ds.n_samples, len(classes)))
    col = np.searchsorted(classes, model_classes)
    full[:, col] = P
    pred = classes[np.argmax(full, axis=1)]
    if mode == "binary":
        y = collapse_binary(ds.labels)
        normal = np.flatnonzero(classes == 0)
        s = 1.0 - full[:, normal[0]] if len(normal) else np.ones(ds.n_samples)
        cm = confusion(y, collapse_binary(pred), classes=[0, 1])
        return compute_metrics(cm, s, y, average="binary")
    cm = confusion(ds.labels, pred, classes)
    return compute_metrics(cm, full, ds.labels, average="macro" if len(classes) > 2 else "binary")


def _resolve_plan(plan, labels, seed):
    if plan is None:
        return None
    if isinstance(plan, RebalancePolicy):
        return plan.plan_for(labels, seed=seed)
    if isinstance(plan, ResamplePlan):
        return plan
    raise TypeError(f"unsupported plan {plan!r}")


def _run_fold(spec, ds, tr, va, plan, seed, mode, classes):
    from .classifiers.model import fit

    train = ds.take(tr)
    p = _resolve_plan(plan, train.labels, seed)
    if p is not None:
        train = rebalance(train, p)
    model = fit(spec, train)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MetricWarning)
        return evaluate_model(model, ds.take(va), mode=mode, classes=classes)


def cross_validate(spec, ds: Dataset, k: int = 5, plan=None, seed: int = 0, mode: str = "macro",
                   n_jobs: int = 1) -> MetricSummary:
    """Stratified k-fold estimate of the six metrics.

    Each fold-train partition is rebalanced with ``plan`` (a
    :class:`ResamplePlan` or a :class:`RebalancePolicy` resolved against the
    fold's own counts); validation partitions are never resampled. The
    summary std uses the n-1 denominator.
    """
    folds = stratified_kfold(ds, k, seed)
    classes = ds.classes
    jobs = (delayed(_run_fold)(spec, ds, tr, va, plan, seed * 1000 + i, mode, classes)
            for i, (tr, va) in enumerate(folds))
    return MetricSummary.from_folds(list(Parallel(n_jobs=n_jobs)(jobs)))


# -- tables -----------------------------------------------------------------

_HEAD = {"acc": "Acc.", "bacc": "BACC", "precision": "Prec.", "recall": "Rec.", "f1": "F1", "auc": "AUC"}


def format_table(rows) -> str:
    """Aligned text table; ``rows`` is a list of ``(model, n_vars, MetricSummary)``."""
    header = ["Alg.", "V"] + [_HEAD[m] for m in METRICS]
    body = []
    for name, nv, summ in rows:
        body.append([name, str(nv)] + [summ.format(m) if m in summ.mean else "-" for m in METRICS])
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    fmt = lambda r: "  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
    lines = [fmt(header), "  ".join("-" * w for w in widths)] + [fmt(r) for r in body]
    return "\n".join(lines) + "\n"
