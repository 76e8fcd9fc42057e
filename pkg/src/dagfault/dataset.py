"""Process data ingestion, variable schemas, stratified splits and scaling."""

from __future__ import annotations

import csv
import gzip
import io
import json
import logging
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._rng import Xoshiro256
from .exceptions import ClassTooSmall, EmptyDataset, LabelOutOfRange, MissingColumn, WidthMismatch

log = logging.getLogger(__name__)

N_CLASSES = 21  # normal + IDV(1..20)
STD_FLOOR = 1e-12
KINDS = ("manipulated", "continuous_measurement", "sampled_measurement")


@dataclass(frozen=True)
class VariableInfo:
    id: str
    description: str = ""
    units: str = ""
    kind: str = "continuous_measurement"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown variable kind {self.kind!r}")


class VariableSchema(tuple):
    """Ordered, id-unique collection of :class:`VariableInfo`."""

    def __new__(cls, variables: Iterable[VariableInfo], name: str = "custom"):
        self = super().__new__(cls, tuple(variables))
        ids = [v.id for v in self]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate variable ids: {dup}")
        self.name = name
        return self

    @property
    def ids(self):
        return [v.id for v in self]

    def index(self, var_id):  # type: ignore[override]
        for i, v in enumerate(self):
            if v.id == var_id:
                return i
        raise MissingColumn(var_id)

    @classmethod
    def from_json(cls, path_or_obj) -> "VariableSchema":
        if isinstance(path_or_obj, (str, Path)):
            obj = json.loads(Path(path_or_obj).read_text(encoding="utf-8"))
        else:
            obj = path_or_obj
        variables = [
            VariableInfo(v["id"], v.get("description", ""), v.get("units", ""),
                         v.get("kind", "continuous_measurement"))
            for v in obj["variables"]
        ]
        return cls(variables, name=obj.get("name", "custom"))

    @classmethod
    def generic(cls, ids: Sequence[str]) -> "VariableSchema":
        return cls([VariableInfo(i) for i in ids], name="generic")


def tep_schema() -> VariableSchema:
    """The 52-variable Tennessee Eastman schema (XMV.1-11, XMEAS.1-41)."""
    text = resources.files("dagfault.data").joinpath("tep52.schema.json").read_text("utf-8")
    return VariableSchema.from_json(json.loads(text))


def tep_class_names() -> dict[int, str]:
    text = resources.files("dagfault.data").joinpath("tep52.schema.json").read_text("utf-8")
    return {c["id"]: c["name"] for c in json.loads(text)["classes"]}


def load_schema(name_or_path: str) -> VariableSchema:
    if name_or_path in ("tep52", "tep"):
        return tep_schema()
    return VariableSchema.from_json(name_or_path)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-labelled numeric matrix with integer class labels (0 = normal)."""

    variables: tuple
    values: np.ndarray
    labels: np.ndarray
    dropped_count: int = 0

    def __post_init__(self):
        variables = tuple(self.variables)
        values = np.array(self.values, dtype=float, copy=True)
        labels = np.array(self.labels, dtype=np.int64, copy=True).reshape(-1)
        if values.ndim != 2:
            values = values.reshape(len(labels), -1)
        if values.shape[0] != labels.shape[0]:
            raise ValueError(f"{values.shape[0]} rows but {labels.shape[0]} labels")
        if values.shape[1] != len(variables):
            raise ValueError(f"{values.shape[1]} columns but {len(variables)} variables")
        if not np.all(np.isfinite(values)):
            raise ValueError("values contain NaN or Inf")
        values.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_arrays(cls, X, y, ids=None) -> "Dataset":
        X = np.asarray(X, dtype=float)
        if ids is None:
            ids = [f"x{j}" for j in range(X.shape[1])]
        return cls(tuple(VariableInfo(i) for i in ids), X, y)

    @property
    def ids(self) -> list[str]:
        return [v.id for v in self.variables]

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_variables(self) -> int:
        return self.values.shape[1]

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def class_counts(self) -> dict[int, int]:
        cls, counts = np.unique(self.labels, return_counts=True)
        return {int(c): int(n) for c, n in zip(cls, counts)}

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.variables, self.values[rows], self.labels[rows])

    def select(self, ids: Sequence[str]) -> "Dataset":
        """Restrict to the given variable ids, in the given order."""
        pos = {v.id: i for i, v in enumerate(self.variables)}
        missing = [i for i in ids if i not in pos]
        if missing:
            raise MissingColumn(missing[0])
        cols = [pos[i] for i in ids]
        return Dataset(tuple(self.variables[c] for c in cols), self.values[:, cols], self.labels)

    def with_values(self, values) -> "Dataset":
        return Dataset(self.variables, values, self.labels)

    def __len__(self):
        return self.n_samples

    def __repr__(self):
        return f"Dataset(n={self.n_samples}, vars={self.n_variables}, classes={self.class_counts()})"


# -- CSV -------------------------------------------------------------------

_IDV_RE = re.compile(r"^\s*IDV\s*\(?\s*(\d+)\s*\)?\s*$", re.IGNORECASE)
_ID_RE = re.compile(r"^(XMV|XMEAS)[\s._(]*0*(\d+)\)?$", re.IGNORECASE)


def _normalize_id(name: str) -> str:
    name = name.strip()
    m = _ID_RE.match(name)
    if m:
        return f"{m.group(1).upper()}.{int(m.group(2))}"
    return name


def _parse_label(raw: str, row: int) -> int:
    s = raw.strip()
    m = _IDV_RE.match(s)
    if m:
        value = int(m.group(1))
    elif s.lower() in ("normal", "fault-free", "fault_free"):
        value = 0
    else:
        try:
            f = float(s)
        except ValueError:
            raise LabelOutOfRange(row, raw) from None
        if not f.is_integer():
            raise LabelOutOfRange(row, raw)
        value = int(f)
    if not 0 <= value < N_CLASSES:
        raise LabelOutOfRange(row, raw)
    return value


def _open_text(path: Path):
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, encoding="utf-8-sig", newline="")


def load_csv(path, schema: VariableSchema | None = None, label_column: str = "fault") -> Dataset:
    """Read a comma-separated file into a :class:`Dataset`.

    Header names are matched against ``schema`` ids (``XMEAS.17``,
    ``xmeas_17`` and ``XMEAS(17)`` are equivalent). Columns not in the schema
    are ignored. Rows with an unparseable or non-finite value are dropped and
    counted in ``dropped_count``. Gzip input is detected by magic bytes.
    """
    path = Path(path)
    if schema is None:
        schema = tep_schema()
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path} is empty") from None
        names = [_normalize_id(h) for h in header]
        pos = {}
        for i, n in enumerate(names):
            pos.setdefault(n, i)
        label_key = label_column.strip()
        label_pos = next((i for i, h in enumerate(header) if h.strip() == label_key), None)
        if label_pos is None:
            raise MissingColumn(label_column)
        cols = []
        for v in schema:
            if v.id not in pos:
                raise MissingColumn(v.id)
            cols.append(pos[v.id])

        rows, labels, dropped = [], [], 0
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not c.strip() for c in record):
                continue
            label = _parse_label(record[label_pos], lineno)
            try:
                vals = [float(record[c]) for c in cols]
            except (ValueError, IndexError):
                dropped += 1
                continue
            if not all(math.isfinite(v) for v in vals):
                dropped += 1
                continue
            rows.append(vals)
            labels.append(label)
    if not rows:
        raise EmptyDataset(f"{path} has no usable rows")
    if dropped:
        log.warning("%s: dropped %d rows with unparseable or non-finite values", path, dropped)
    values = np.array(rows, dtype=float)
    return Dataset(tuple(schema), values, np.array(labels), dropped_count=dropped)


def write_csv(ds: Dataset, path, label_column: str = "fault") -> None:
    """Write ``ds`` so that :func:`load_csv` reads back identical values."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ds.ids + [label_column])
        for row, lab in zip(ds.values, ds.labels):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


# -- splits ----------------------------------------------------------------

def _class_indices(labels, seed):
    rng = Xoshiro256(seed)
    out = {}
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c).tolist()
        out[int(c)] = rng.shuffle(idx)
    return out


def split_indices(labels, test_fraction: float, seed: int = 0):
    """Index form of :func:`stratified_split`: ``(train_idx, test_idx)``."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    labels = np.asarray(labels)
    uniq, counts = np.unique(labels, return_counts=True)
    for c, n in zip(uniq, counts):
        if n < 2:
            raise ClassTooSmall(int(c), int(n), 2)
    test_idx = []
    for idx in _class_indices(labels, seed).values():
        n_test = int(math.floor(len(idx) * test_fraction + 0.5))
        test_idx.extend(idx[: min(max(n_test, 1), len(idx) - 1)])
    test_idx = np.sort(np.array(test_idx, dtype=np.int64))
    mask = np.ones(len(labels), dtype=bool)
    mask[test_idx] = False
    return np.flatnonzero(mask), test_idx


def stratified_split(ds: Dataset, test_fraction: float, seed: int = 0):
    """Split into (train, test) with per-class test count ``round(n*fraction)``.

    Every class keeps at least one row on each side.
    """
    train_idx, test_idx = split_indices(ds.labels, test_fraction, seed)
    return ds.take(train_idx), ds.take(test_idx)


def stratified_kfold(ds_or_labels, k: int = 5, seed: int = 0):
    """Stratified k-fold index pairs ``[(train_idx, valid_idx), ...]``.

    Each class's shuffled rows are dealt round-robin over the folds, the deal
    continuing where the previous class stopped so fold sizes stay balanced.
    """
    labels = ds_or_labels.labels if isinstance(ds_or_labels, Dataset) else np.asarray(ds_or_labels)
    if k < 2:
        raise ValueError("k must be at least 2")
    uniq, counts = np.unique(labels, return_counts=True)
    for c, n in zip(uniq, counts):
        if n < k:
            raise ClassTooSmall(int(c), int(n), k)
    folds = [[] for _ in range(k)]
    offset = 0
    for c, idx in _class_indices(labels, seed).items():
        for p, i in enumerate(idx):
            folds[(offset + p) % k].append(i)
        offset = (offset + len(idx)) % k
    out = []
    n = len(labels)
    for f in folds:
        valid = np.sort(np.array(f, dtype=np.int64))
        mask = np.ones(n, dtype=bool)
        mask[valid] = False
        out.append((np.flatnonzero(mask), valid))
    return out


# -- scaling ---------------------------------------------------------------

class Scaler(TransformerMixin, BaseEstimator):
    """Z-score standardiser with population stddev and a floor for constant columns."""

    def __init__(self, std_floor=STD_FLOOR):
        self.std_floor = std_floor

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.mean_ = X.mean(axis=0)
        self.scale_ = np.maximum(X.std(axis=0), self.std_floor)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise WidthMismatch(self.n_features_in_, X.shape[1])
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, Z):
        check_is_fitted(self, "mean_")
        return np.asarray(Z, dtype=float) * self.scale_ + self.mean_


def fit_scaler(train: Dataset) -> Scaler:
    if train.n_samples == 0:
        raise EmptyDataset("cannot fit a scaler on an empty dataset")
    return Scaler().fit(train.values)


def apply_scaler(s: Scaler, ds: Dataset) -> Dataset:
    return ds.with_values(s.transform(ds.values))
