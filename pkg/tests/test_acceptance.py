"""Acceptance criteria, one test each.

Every test prints a single ``criterion N: PASS|FAIL`` line with its evidence
and runtime, then asserts. The runtime limit is part of the pass condition.
Criterion 8 needs the public TEP data: point ``DAGFAULT_TEP_CSV`` at a CSV in
the package's TEP layout (52 variables plus a ``fault`` column).
"""

import os
import shutil
import time
import warnings

import numpy as np
import pytest
import yaml

from dagfault.attribution import shap_explain, shap_matrix
from dagfault.causal import DSeparationOracle, FisherZ, NOTEARS, ICALiNGAM, fci, pc, rfci, run_suite, standardize
from dagfault.causal.synth import order_consistent, sem_data
from dagfault.classifiers import ModelSpec, fit
from dagfault.classifiers.mlp import MLPClassifier
from dagfault.config import load_config, parse_config
from dagfault.consensus import skeleton_agreement
from dagfault.dataset import Dataset, Scaler, write_csv
from dagfault.evaluation import binary_auc, compute_metrics
from dagfault.exceptions import MetricWarning
from dagfault.pipeline import run_pipeline
from dagfault.resampling import ResamplePlan, smote
from dagfault.synthetic import tep_like

from conftest import make_blobs
from oracles import all_dags, cpdag_marks_by_enumeration, dag_shd
from test_evaluation import cm_from, literal_binary, trapezoid_auc


def verdict(capsys, n, ok, detail, elapsed, limit):
    ok = bool(ok) and elapsed < limit
    with capsys.disabled():
        print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}  [{elapsed:.1f}s, limit {limit:.0f}s]")
    return ok


def test_criterion_01_metric_formulas(capsys):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MetricWarning)
        done = 0
        while done < 1000:
            tp, tn, fp, fn = (int(v) for v in rng.integers(0, 50, 4))
            if tp + tn + fp + fn == 0:
                continue
            m = compute_metrics(cm_from(tp, tn, fp, fn), with_auc=False)
            got = np.array([m.acc, m.bacc, m.precision, m.recall, m.f1])
            worst = max(worst, np.max(np.abs(got - literal_binary(tp, tn, fp, fn))))
            done += 1
    worst_auc, done = 0.0, 0
    while done < 1000:
        n = int(rng.integers(2, 200))
        y = rng.integers(0, 2, n) == 1
        if y.all() or not y.any():
            continue
        s = np.round(rng.random(n), int(rng.integers(1, 4)))
        worst_auc = max(worst_auc, abs(binary_auc(y, s) - trapezoid_auc(y, s)))
        done += 1
    ok = verdict(capsys, 1, worst <= 1e-12 and worst_auc <= 1e-12,
                 f"max metric error {worst:.1e}, max AUC error {worst_auc:.1e}", time.perf_counter() - t0, 5)
    assert ok


def test_criterion_02_shap_axioms(capsys):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst_lin = 0.0
    for M in range(1, 9):
        for _ in range(5):
            w = rng.normal(size=M)
            bg = rng.normal(size=(int(rng.integers(1, 30)), M))
            x = rng.normal(size=M)
            sv = shap_explain(lambda X: X @ w + 0.7, x, bg)
            worst_lin = max(worst_lin, np.max(np.abs(sv.values - w * (x - bg.mean(axis=0)))))
    ds = make_blobs([40, 40, 40], n_features=6, sep=1.0, seed=3)
    worst_eff = 0.0
    for kind, hp in [("gbt", {"n_estimators": 15, "max_depth": 3}), ("mlp", {"hidden_layers": [8], "max_epochs": 30})]:
        model = fit(ModelSpec(kind, hp, seed=1), ds)
        sm = shap_matrix(model, ds, ds.take(np.arange(0, 120, 6)))
        gap = sm.values.sum(axis=1) - (sm.output - sm.base_for_rows())
        worst_eff = max(worst_eff, np.max(np.abs(gap)))
    ok = verdict(capsys, 2, worst_lin <= 1e-9 and worst_eff <= 1e-6,
                 f"linear closed-form error {worst_lin:.1e}, efficiency gap {worst_eff:.1e} on 240 rows",
                 time.perf_counter() - t0, 30)
    assert ok


def test_criterion_03_mlp_gradient(capsys):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    worst = 0.0
    for activation in ("relu", "tanh", "logistic"):
        est = MLPClassifier(hidden_layers=(6, 4), activation=activation, l2=0.01)
        est._init_weights(5, 3, rng)
        X = rng.normal(size=(8, 5))
        Y = np.eye(3)[rng.integers(0, 3, 8)]
        _, dW, db = est.loss_and_gradients(X, Y)
        params = list(zip(est.coefs_, dW)) + list(zip(est.intercepts_, db))
        eps = 1e-5
        for _ in range(100):
            P, G = params[int(rng.integers(len(params)))]
            idx = tuple(int(rng.integers(s)) for s in P.shape)
            old = P[idx]
            P[idx] = old + eps
            up = est._loss(X, Y)
            P[idx] = old - eps
            down = est._loss(X, Y)
            P[idx] = old
            num = (up - down) / (2 * eps)
            worst = max(worst, abs(num - G[idx]) / max(abs(num), abs(G[idx]), 1e-6))
    ok = verdict(capsys, 3, worst <= 1e-4, f"max relative error {worst:.1e} over 300 weights",
                 time.perf_counter() - t0, 10)
    assert ok


def test_criterion_04_pc_exhaustive(capsys):
    t0 = time.perf_counter()
    dags = list(all_dags(4))
    truth = cpdag_marks_by_enumeration(dags)
    wrong = sum(not np.array_equal(pc(test=DSeparationOracle(A)).marks, truth[A.tobytes()]) for A in dags)
    ok = verdict(capsys, 4, len(dags) == 543 and wrong == 0, f"{len(dags) - wrong}/{len(dags)} CPDAGs exact",
                 time.perf_counter() - t0, 60)
    assert ok


def test_criterion_05_synthetic_recovery(capsys):
    t0 = time.perf_counter()
    n_l = n_n = n_p = 0
    for seed in range(50):
        X, sem = sem_data(5, 5000, seed)
        T = sem.dag
        n_l += order_consistent(ICALiNGAM().fit(X).causal_order_, T)
        est = NOTEARS().fit(X)
        n_n += est.h_ < 1e-8 and dag_shd(est.W_ != 0, T) <= 1
        S = pc(X).adjacency()
        n_p += np.triu(S != (T | T.T), 1).sum() <= 1
    ok = verdict(capsys, 5, n_l >= 45 and n_n >= 40 and n_p >= 40,
                 f"lingam order {n_l}/50 (need 45), notears {n_n}/50 (need 40), pc skeleton {n_p}/50 (need 40)",
                 time.perf_counter() - t0, 600)
    assert ok


def test_criterion_06_rfci_economy(capsys):
    t0 = time.perf_counter()
    wins, rows = 0, []
    for seed in range(10):
        X = standardize(sem_data(10, 2000, seed, edge_prob=0.5)[0])
        a, b = FisherZ(X), FisherZ(X)
        fci(test=a)
        rfci(test=b)
        wins += b.n_calls < a.n_calls
        rows.append(f"{b.n_calls}<{a.n_calls}")
    ok = verdict(capsys, 6, wins == 10, f"rfci below fci in {wins}/10 seeds (calls {', '.join(rows)})",
                 time.perf_counter() - t0, 300)
    assert ok


def _segment_distances(S, P0, P1):
    """Distance from each row of ``S`` to the nearest segment ``P0[k]``-``P1[k]``."""
    D = P1 - P0
    denom = np.einsum("kd,kd->k", D, D)
    u = np.einsum("nkd,kd->nk", S[:, None, :] - P0[None], D) / np.where(denom > 0, denom, 1.0)
    u = np.clip(np.where(denom > 0, u, 0.0), 0.0, 1.0)
    closest = P0[None] + u[..., None] * D[None]
    return np.sqrt(((S[:, None, :] - closest) ** 2).sum(-1)).min(axis=1)


def test_criterion_07_smote_geometry(capsys):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    k = 5
    X = np.vstack([rng.normal(size=(60, 4)) * [1, 3, 0.5, 2], rng.normal(4, 1, size=(200, 4))])
    ds = Dataset.from_arrays(X, np.r_[np.ones(60, int), np.zeros(200, int)])
    out = smote(ds, ResamplePlan(smote_k=k, targets={1: 60 + 10_000}, seed=7))
    synth = out.values[ds.n_samples:]
    # brute-force neighbour sets on the standardized minority class, ties kept
    Z = Scaler().fit_transform(X)[:60]
    Dm = np.sqrt(((Z[:, None] - Z[None]) ** 2).sum(-1))
    np.fill_diagonal(Dm, np.inf)
    pairs = [(i, j) for i in range(60) for j in np.flatnonzero(Dm[i] <= np.sort(Dm[i])[k - 1] + 1e-12)]
    P0 = np.array([X[i] for i, _ in pairs])
    P1 = np.array([X[j] for _, j in pairs])
    worst = max(_segment_distances(chunk, P0, P1).max() for chunk in np.array_split(synth, 20))
    ok = verdict(capsys, 7, len(synth) == 10_000 and worst < 1e-9,
                 f"{len(synth)} synthetics, max distance to a neighbour segment {worst:.1e}",
                 time.perf_counter() - t0, 30)
    assert ok


TEP_CSV = os.environ.get("DAGFAULT_TEP_CSV")


def test_criterion_08_tep_soft_repro(capsys, tmp_path):
    if not TEP_CSV:
        with capsys.disabled():
            print("\ncriterion 8: NOT RUN  needs the public TEP data; set DAGFAULT_TEP_CSV")
        pytest.skip("set DAGFAULT_TEP_CSV to a TEP CSV to run the soft reproduction")
    t0 = time.perf_counter()
    raw = {"data": {"path": TEP_CSV, "schema": "tep"}, "output": str(tmp_path), "models": [{"kind": "mlp"}],
           "shap": {"model": "mlp"}, "subsets": [10], "causal": {"algorithms": ["pc"], "subset": 10}}
    b = run_pipeline(parse_config(yaml.safe_dump(raw)))
    base, top = b.baseline["mlp"].mean["bacc"], b.subsets[10]["mlp"].mean["bacc"]
    hits = set(b.ranking.ids[:10]) & {"XMV.11", "XMV.10", "XMEAS.17", "XMEAS.18"}
    ok = verdict(capsys, 8, top >= base and len(hits) >= 3,
                 f"bacc top10 {top:.3f} vs baseline {base:.3f}; reference variables in top 10: {sorted(hits)}",
                 time.perf_counter() - t0, 7200)
    assert ok


def test_criterion_09_consensus_sanity(capsys):
    t0 = time.perf_counter()
    good, fails = 0, 0
    for seed in range(20):
        X, sem = sem_data(10, 5000, seed, edge_prob=2.0 / 9, weight_range=(0.5, 1.0))
        res = run_suite(X, seed=seed)
        fails += len(res.failures)
        C = skeleton_agreement(list(res.graphs.values()), list(res.graphs)).count_matrix()
        good += bool(np.all(C[sem.dag | sem.dag.T] >= 3))
    ok = verdict(capsys, 9, good >= 14,
                 f"all true edges at count >= 3 in {good}/20 seeds (need 14); {fails} algorithm failures",
                 time.perf_counter() - t0, 900)
    assert ok


def test_criterion_10_determinism(capsys, tmp_path):
    t0 = time.perf_counter()
    ds, _ = tep_like(n_normal=150, n_per_fault=30, n_faults=3, ids=[f"v{i}" for i in range(10)], seed=10)
    write_csv(ds, tmp_path / "d.csv")
    out = tmp_path / "out"
    raw = {"data": {"path": str(tmp_path / "d.csv"), "schema": "generic"}, "seed": 10, "threads": 1,
           "output": str(out), "cv": {"k": 3},
           "models": [{"kind": "knn"}, {"kind": "gbt", "hyperparameters": {"n_estimators": 10, "max_depth": 3}},
                      {"kind": "mlp", "hyperparameters": {"hidden_layers": [8], "max_epochs": 20}}],
           "shap": {"model": "gbt", "background": 20, "explain": 20}, "subsets": [4, 6], "causal": {"subset": 6}}
    run_pipeline(parse_config(yaml.safe_dump(raw)))
    manifest = tmp_path / "manifest.json"
    shutil.copy(out / "manifest.json", manifest)

    def snapshot():
        return {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*.json"))}

    runs = []
    for _ in range(2):
        shutil.rmtree(out)
        run_pipeline(load_config(manifest))
        runs.append(snapshot())
    differ = sorted(k for k in runs[0].keys() | runs[1].keys() if runs[0].get(k) != runs[1].get(k))
    ok = verdict(capsys, 10, not differ and len(runs[0]) > 10,
                 f"{len(runs[0])} JSON files compared, differing: {differ or 'none'}", time.perf_counter() - t0, 600)
    assert ok
