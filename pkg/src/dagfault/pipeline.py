"""Five-stage workflow: baseline CV, Shapley ranking, subset sweep, causal graphs, consensus."""

from __future__ import annotations

import csv
import hashlib
import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attribution import CoalitionBudget, Ranking, rank_features, sample_background, select_top, shap_matrix
from .causal import rfci, run_suite, standardize
from .causal.skeleton import ConstraintConfig
from .classifiers import ModelSpec, fit, preset
from .classifiers.search import DEFAULT_GRIDS, SearchSpace, random_search
from .config import PipelineConfig
from .consensus import EdgeFrequencyTable, centrality, consensus_graph, skeleton_agreement
from .dataset import Dataset, VariableSchema, load_csv, load_schema, stratified_split
from .evaluation import cross_validate
from .exceptions import ConfigInvalid, DataError, StageFailed
from .resampling import RebalancePolicy, rebalance

log = logging.getLogger(__name__)

FAULT_COLUMN = "fault"


@dataclass
class ReportBundle:
    seed: int
    n_samples: int
    n_variables: int
    mode: str
    baseline: dict = field(default_factory=dict)  # kind -> MetricSummary
    subsets: dict = field(default_factory=dict)  # m -> {kind -> MetricSummary}
    specs: dict = field(default_factory=dict)  # "kind@m" -> ModelSpec
    searches: dict = field(default_factory=dict)  # "kind@m" -> [(spec dict, score)]
    ranking: Ranking | None = None
    shap_model: str = ""
    causal_vertices: list = field(default_factory=list)
    graphs: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    ci_tests: dict = field(default_factory=dict)
    full_graph: object = None
    table: EdgeFrequencyTable | None = None
    consensus: object = None
    min_count: int = 0
    centrality: dict = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def n_summaries(self) -> int:
        return len(self.baseline) + sum(len(v) for v in self.subsets.values())

    def report_dict(self) -> dict:
        def summ(kind_map, m):
            out = {}
            for kind, s in sorted(kind_map.items()):
                d = {"n_folds": s.n_folds, "mean": s.mean, "std": s.std}
                spec = self.specs.get(f"{kind}@{m}")
                if spec is not None:
                    d["spec"] = spec.to_dict()
                out[kind] = d
            return out

        return {
            "seed": self.seed,
            "n_samples": self.n_samples,
            "n_variables": self.n_variables,
            "mode": self.mode,
            "baseline": summ(self.baseline, self.n_variables),
            "subsets": {str(m): summ(v, m) for m, v in sorted(self.subsets.items())},
            "ranking": {"model": self.shap_model,
                        "items": [] if self.ranking is None else self.ranking.to_dict()["ranking"]},
            "causal": {
                "vertices": list(self.causal_vertices),
                "graphs": {k: g.to_dict() for k, g in sorted(self.graphs.items())},
                "failures": dict(sorted(self.failures.items())),
                "ci_tests": dict(sorted(self.ci_tests.items())),
                "full_graph": None if self.full_graph is None else self.full_graph.to_dict(),
            },
            "consensus": {
                "min_count": self.min_count,
                "table": {} if self.table is None else self.table.to_dict(),
                "graph": None if self.consensus is None else self.consensus.to_dict(),
                "centrality": dict(self.centrality),
            },
        }


# -- helpers -----------------------------------------------------------------

def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_data(cfg: PipelineConfig) -> Dataset:
    d = cfg["data"]
    path = Path(d["path"])
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    if d["schema"] == "generic":
        with open(path, newline="", encoding="utf-8") as fh:
            header = next(csv.reader(fh), [])
        schema = VariableSchema.generic([h.strip() for h in header if h.strip() != d["label_column"]])
    else:
        schema = load_schema(d["schema"])
    ds = load_csv(path, schema, d["label_column"])
    if d["max_rows"] and ds.n_samples > d["max_rows"]:
        ds = sample_background(ds, d["max_rows"], cfg.seed)
    return ds


def policy_from(cfg: PipelineConfig) -> RebalancePolicy:
    r = cfg["resample"]
    return RebalancePolicy(r["smote_k"], r["oversample_factor"], r["majority_factor"], r["majority_class"],
                           enabled=r["enabled"])


def _resolve_spec(model_cfg, ds, cfg, policy, bundle, width):
    kind = model_cfg["kind"]
    if model_cfg.get("hyperparameters"):
        return ModelSpec(kind, model_cfg["hyperparameters"], cfg.seed)
    search = model_cfg.get("search")
    if search is not None:
        grid = search.get("grid") or DEFAULT_GRIDS[kind]
        space = SearchSpace({kind: grid}, search.get("n_iter", 20), search.get("objective", "f1_macro"))
        best, table = random_search(space, ds, cfg["cv"]["k"], cfg.seed, policy, cfg["threads"])
        bundle.searches[f"{kind}@{width}"] = [(s.to_dict(), score) for s, score in table]
        return best
    return preset(kind, width, cfg.seed)


@contextmanager
def _stage(bundle, name):
    """Time a stage; unexpected errors become :class:`StageFailed`."""
    log.info("stage %s", name)
    t0 = time.perf_counter()
    try:
        yield
    except (ConfigInvalid, DataError, StageFailed):
        raise
    except Exception as exc:
        raise StageFailed(name, exc) from exc
    finally:
        bundle.timings[name] = time.perf_counter() - t0


# -- stages ------------------------------------------------------------------

def _sweep(ds, cfg, policy, bundle, width):
    out = {}
    for m in cfg["models"]:
        spec = _resolve_spec(m, ds, cfg, policy, bundle, width)
        bundle.specs[f"{m['kind']}@{width}"] = spec
        out[m["kind"]] = cross_validate(spec, ds, cfg["cv"]["k"], policy, cfg.seed, cfg["cv"]["mode"],
                                        cfg["threads"])
    return out


def shap_ranking(ds: Dataset, cfg: PipelineConfig, policy=None) -> Ranking:
    """Fit the explaining model on a stratified training part and rank variables on the holdout."""
    policy = policy or policy_from(cfg)
    s = cfg["shap"]
    kind = cfg.shap_model
    model_cfg = next(m for m in cfg["models"] if m["kind"] == kind)
    train, hold = stratified_split(ds, cfg["cv"]["holdout_fraction"], cfg.seed)
    dummy = ReportBundle(cfg.seed, 0, 0, "")
    spec = _resolve_spec(model_cfg, train, cfg, policy, dummy, ds.n_variables)
    model = fit(spec, rebalance(train, policy.plan_for(train.labels, cfg.seed)))
    background = sample_background(train, s["background"], cfg.seed)
    explain = sample_background(hold, s["explain"], cfg.seed + 1)
    budget = CoalitionBudget(s["n_coalitions"], s["exact_threshold"], cfg.seed)
    sm = shap_matrix(model, explain, background, budget, n_jobs=cfg["threads"])
    return rank_features(sm)


def causal_data(ds: Dataset, ids, cfg: PipelineConfig):
    """Selected columns (plus the fault indicator) subsampled to ``causal.max_rows``."""
    c = cfg["causal"]
    sub = ds.select(ids)
    if c["max_rows"] and sub.n_samples > c["max_rows"]:
        sub = sample_background(sub, c["max_rows"], cfg.seed)
    X = sub.values
    names = list(ids)
    if c["fault_indicator"] == "binary":
        X = np.column_stack([X, (sub.labels != 0).astype(float)])
        names.append(FAULT_COLUMN)
    return X, names


def run_causal(ds: Dataset, ranking: Ranking, cfg: PipelineConfig, bundle: ReportBundle):
    c = cfg["causal"]
    ids = ds.ids if c["subset"] == "all" else select_top(ranking, c["subset"]).ids
    X, names = causal_data(ds, ids, cfg)
    res = run_suite(X, names, c["algorithms"], c["alpha"], c["max_cond_size"], c["lambda1"],
                    c["w_threshold"], c["lingam_threshold"], cfg.seed)
    bundle.causal_vertices = names
    bundle.graphs, bundle.failures, bundle.ci_tests = res.graphs, res.failures, res.ci_tests
    if c["full_rfci"]:
        Xf, full_names = causal_data(ds, ds.ids, cfg)
        try:
            bundle.full_graph = rfci(standardize(Xf), cfg=ConstraintConfig(c["alpha"], c["max_cond_size"]),
                                     vertices=full_names)
        except Exception as exc:  # recorded, not fatal
            bundle.failures["rfci_full"] = f"{type(exc).__name__}: {exc}"
    if bundle.graphs:
        names_ok = sorted(bundle.graphs)
        bundle.table = skeleton_agreement([bundle.graphs[k] for k in names_ok], names_ok)
        bundle.min_count = min(c["min_count"], len(names_ok))
        bundle.consensus = consensus_graph(bundle.table, bundle.min_count)
        bundle.centrality = centrality(bundle.table)


def run_pipeline(cfg: PipelineConfig, write=True, ranking: Ranking | None = None) -> ReportBundle:
    """Run every stage in order and (by default) write all artifacts to ``cfg['output']``."""
    from . import __version__
    from .reporting import export_report, versions

    ds = load_data(cfg)
    too_big = [m for m in cfg["subsets"] if m > ds.n_variables]
    if too_big:
        raise ConfigInvalid(f"subsets: sizes {too_big} exceed the {ds.n_variables} available variables")
    policy = policy_from(cfg)
    bundle = ReportBundle(cfg.seed, ds.n_samples, ds.n_variables, cfg["cv"]["mode"])
    with _stage(bundle, "baseline"):
        bundle.baseline = _sweep(ds, cfg, policy, bundle, ds.n_variables)
    with _stage(bundle, "ranking"):
        bundle.shap_model = cfg.shap_model
        bundle.ranking = ranking or shap_ranking(ds, cfg, policy)
    with _stage(bundle, "subsets"):
        for m in cfg["subsets"]:
            sub = ds.select(select_top(bundle.ranking, m).ids)
            bundle.subsets[m] = _sweep(sub, cfg, policy, bundle, m)
    with _stage(bundle, "causal"):
        run_causal(ds, bundle.ranking, cfg, bundle)
    bundle.manifest = {
        "config": cfg.to_dict(),
        "data_sha256": _sha256(cfg["data"]["path"]),
        "seeds": {"run": cfg.seed, "folds": cfg.seed, "shap": cfg.seed, "causal": cfg.seed},
        "versions": {"dagfault": __version__, **versions()},
    }
    if write:
        export_report(bundle, cfg["output"])
    return bundle
