"""Pipeline configuration: a YAML file validated against a shipped JSON schema.

Validation errors carry the line number of the offending YAML node.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

from .classifiers.model import HYPERPARAMETER_KEYS
from .exceptions import ConfigInvalid

DEFAULTS = {
    "data": {"path": None, "schema": "tep52", "label_column": "fault", "max_rows": None},
    "seed": 0,
    "threads": 1,
    "output": "out",
    "cv": {"k": 5, "mode": "macro", "holdout_fraction": 0.2},
    "resample": {"enabled": True, "smote_k": 5, "oversample_factor": 2.0, "majority_factor": 2.0,
                 "majority_class": 0},
    "models": [{"kind": "mlp"}, {"kind": "gbt"}, {"kind": "knn"}],
    "shap": {"model": None, "background": 100, "explain": 200, "n_coalitions": 1024,
             "exact_threshold": 15},
    "subsets": [7, 10, 12, 15],
    "causal": {"algorithms": ["pc", "fci", "rfci", "lingam", "notears"], "subset": 10, "alpha": 0.05,
               "max_cond_size": 3, "lambda1": 0.05, "w_threshold": 0.3, "lingam_threshold": 0.05,
               "fault_indicator": "binary", "max_rows": 5000, "full_rfci": False, "min_count": 3},
}


def config_schema() -> dict:
    return json.loads(resources.files("dagfault.data").joinpath("config.schema.json").read_text("utf-8"))


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _line_of(node, path):
    """1-based line of the YAML node at ``path`` (deepest existing ancestor)."""
    line = node.start_mark.line + 1 if node is not None else None
    for key in path:
        if isinstance(node, yaml.MappingNode):
            pair = next(((k, v) for k, v in node.value if k.value == key), None)
            if pair is None:
                break
            # report the key's line; a nested mapping value starts on the next line
            node, line = pair[1], pair[0].start_mark.line + 1
            continue
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            nxt = node.value[key]
        else:
            nxt = None
        if nxt is None:
            break
        node, line = nxt, nxt.start_mark.line + 1
    return line


@dataclass
class PipelineConfig:
    """Fully resolved configuration (defaults filled in)."""

    raw: dict
    source: str | None = None

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def seed(self) -> int:
        return self.raw["seed"]

    @property
    def shap_model(self) -> str:
        return self.raw["shap"]["model"]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def dump(self) -> str:
        return yaml.safe_dump(self.raw, sort_keys=True, default_flow_style=False)

    def override(self, seed=None, threads=None, subset_size=None, output=None) -> "PipelineConfig":
        raw = self.to_dict()
        if seed is not None:
            raw["seed"] = int(seed)
        if threads is not None:
            raw["threads"] = int(threads)
        if subset_size is not None:
            raw["causal"]["subset"] = int(subset_size)
            if int(subset_size) not in raw["subsets"]:
                raw["subsets"] = sorted(raw["subsets"] + [int(subset_size)])
        if output is not None:
            raw["output"] = str(output)
        return validate(raw, source=self.source)


def validate(raw: dict, node=None, source=None) -> PipelineConfig:
    """Check ``raw`` against the schema plus cross-field rules; fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigInvalid("top level must be a mapping", _line_of(node, []))
    validator = jsonschema.Draft202012Validator(config_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        e = errors[0]
        path = list(e.absolute_path)
        if e.validator == "additionalProperties":
            extra = sorted(set(e.instance) - set(e.schema.get("properties", {})))
            path.append(extra[0])
        where = "/".join(str(p) for p in path) or "<root>"
        raise ConfigInvalid(f"{where}: {e.message}", _line_of(node, path))
    cfg = _merge(DEFAULTS, raw)
    if "models" in raw:
        cfg["models"] = copy.deepcopy(raw["models"])
    kinds = [m["kind"] for m in cfg["models"]]
    if len(set(kinds)) != len(kinds):
        raise ConfigInvalid("models: each kind may appear once", _line_of(node, ["models"]))
    if cfg["shap"]["model"] is not None and cfg["shap"]["model"] not in kinds:
        raise ConfigInvalid(f"shap/model: {cfg['shap']['model']!r} is not among the configured models",
                            _line_of(node, ["shap", "model"]))
    for i, m in enumerate(cfg["models"]):
        bad = sorted(set(m.get("hyperparameters") or {}) - set(HYPERPARAMETER_KEYS[m["kind"]]))
        if bad:
            raise ConfigInvalid(f"models/{i}/hyperparameters: unknown keys {bad} for {m['kind']}",
                                _line_of(node, ["models", i, "hyperparameters", bad[0]]))
    cfg["shap"]["model"] = cfg["shap"]["model"] or kinds[0]
    cfg["subsets"] = sorted(set(cfg["subsets"]))
    sub = cfg["causal"]["subset"]
    if sub != "all" and sub not in cfg["subsets"]:
        raise ConfigInvalid(f"causal/subset: {sub} is not one of the subset sizes {cfg['subsets']} or 'all'",
                            _line_of(node, ["causal", "subset"]))
    return PipelineConfig(cfg, source)


def parse_config(text: str, source=None) -> PipelineConfig:
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        raise ConfigInvalid(f"not valid YAML: {getattr(err, 'problem', err)}",
                            mark.line + 1 if mark else None) from None
    if isinstance(raw, dict) and "config" in raw and "data" not in raw:
        # a run manifest: re-run with the configuration it recorded
        inner = node.value[[k.value for k, _ in node.value].index("config")][1]
        return validate(raw["config"], inner, source)
    return validate(raw, node, source)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigInvalid(f"cannot read {path}: {err.strerror}") from None
    cfg = parse_config(text, str(path))
    data_path = Path(cfg.raw["data"]["path"])
    if not data_path.is_absolute():
        cfg.raw["data"]["path"] = str((path.parent / data_path).resolve())
    return cfg
