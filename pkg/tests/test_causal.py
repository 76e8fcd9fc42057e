import math
import warnings

import numpy as np
import pydot
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from dagfault.causal import (ARROW, CIRCLE, NONE, TAIL, DSeparationOracle, FisherZ, ICALiNGAM, MixedGraph,
                             NOTEARS, acyclicity_h, d_separated, fci, fisher_z, ica_lingam, notears, pc,
                             rfci, run_suite, topological_order)
from dagfault.causal.lingam import causal_order
from dagfault.causal.notears import _Subproblem, proximal_solve
from dagfault.causal.skeleton import ConstraintConfig
from dagfault.causal.synth import order_consistent, random_sem, sem_data
from dagfault.exceptions import CITooFewSamples, GaussianDegeneracy, GraphError
from oracles import (all_dags, ancestors, cpdag_marks_by_enumeration, dag_shd, mag_adjacency,
                     random_latent_dag)


def dag(d, edges):
    A = np.zeros((d, d), dtype=bool)
    for a, b in edges:
        A[a, b] = True
    return A


def uniform(rng, size):
    return rng.uniform(-math.sqrt(3), math.sqrt(3), size)


# -- graph type ---------------------------------------------------------------

class TestMixedGraph:
    def test_cpdag_rejects_circles(self):
        M = np.array([[0, CIRCLE], [CIRCLE, 0]])
        with pytest.raises(GraphError):
            MixedGraph(["a", "b"], M, kind="cpdag")

    def test_weighted_dag_rejects_cycle(self):
        W = np.array([[0, 1.0], [1.0, 0]])
        with pytest.raises(GraphError):
            MixedGraph.from_directed(["a", "b"], W)

    def test_one_sided_edge_rejected(self):
        with pytest.raises(GraphError):
            MixedGraph(["a", "b"], np.array([[0, ARROW], [0, 0]]))

    def test_json_round_trip(self):
        M = np.zeros((3, 3), dtype=int)
        M[0, 1], M[1, 0] = ARROW, CIRCLE
        M[1, 2], M[2, 1] = ARROW, ARROW
        g = MixedGraph(["a", "b", "c"], M)
        back = MixedGraph.from_dict(g.to_dict())
        assert back == g
        W = np.array([[0, 0.93, 0], [0, 0, -1.5], [0, 0, 0]])
        h = MixedGraph.from_directed(["a", "b", "c"], W)
        back = MixedGraph.from_dict(h.to_dict())
        assert np.allclose(back.weights, W)

    def test_dot_empty_graph_lists_vertices(self):
        dot = MixedGraph(["a", "b"]).to_dot()
        assert '"a";' in dot and '"b";' in dot and "->" not in dot
        assert pydot.graph_from_dot_data(dot)[0].get_node('"a"')

    def test_dot_weight_label_and_circle(self):
        W = np.array([[0, 0.934], [0, 0]])
        dot = MixedGraph.from_directed(["A", "B"], W).to_dot()
        assert 'label="0.93"' in dot
        M = np.array([[0, ARROW], [CIRCLE, 0]])
        dot = MixedGraph(["A", "B"], M).to_dot()
        assert "arrowtail=odot" in dot and "arrowhead=normal" in dot
        (parsed,) = pydot.graph_from_dot_data(dot)
        assert len(parsed.get_edges()) == 1

    def test_topological_order(self):
        assert topological_order(dag(3, [(2, 1), (1, 0)])) == [2, 1, 0]
        assert topological_order(dag(2, [(0, 1), (1, 0)])) is None


# -- conditional independence -----------------------------------------------

class TestFisherZ:
    def test_calibration_under_independence(self):
        accepted = 0
        for seed in range(100):
            r = np.random.default_rng(seed)
            X = r.normal(size=(5000, 2))
            accepted += fisher_z(X, 0, 1, (), 0.05).independent
        assert accepted >= 93

    def test_chain(self, rng):
        x = rng.normal(size=5000)
        y = x + rng.normal(size=5000)
        z = y + rng.normal(size=5000)
        X = np.column_stack([x, y, z])
        assert fisher_z(X, 0, 2, (1,)).independent
        assert not fisher_z(X, 0, 2, ()).independent

    def test_exact_zero_correlation(self, rng):
        a = rng.normal(size=100)
        b = rng.normal(size=100)
        a -= a.mean()
        b -= b.mean()
        b -= a * (a @ b) / (a @ a)
        r = fisher_z(np.column_stack([a, b]), 0, 1)
        assert abs(r.statistic) < 1e-12 and r.p_value == pytest.approx(1.0)

    def test_too_few_samples(self, rng):
        with pytest.raises(CITooFewSamples):
            fisher_z(rng.normal(size=(5, 4)), 0, 1, (2, 3))

    def test_counts_distinct_and_total(self, rng):
        t = FisherZ(rng.normal(size=(100, 3)))
        t(0, 1, (2,))
        t(1, 0, (2,))
        assert t.n_calls == 2 and t.n_tests == 1


class TestDSeparation:
    def test_hand_examples(self):
        chain = dag(3, [(0, 1), (1, 2)])
        assert d_separated(chain, 0, 2, [1]) and not d_separated(chain, 0, 2, [])
        collider = dag(3, [(0, 2), (1, 2)])
        assert d_separated(collider, 0, 1, []) and not d_separated(collider, 0, 1, [2])
        # conditioning on a descendant of the collider also opens the path
        desc = dag(4, [(0, 2), (1, 2), (2, 3)])
        assert not d_separated(desc, 0, 1, [3])


# -- PC -------------------------------------------------------------------------

class TestPC:
    def test_all_four_node_dags_match_equivalence_class(self):
        dags = list(all_dags(4))
        assert len(dags) == 543
        truth = cpdag_marks_by_enumeration(dags)
        wrong = [A for A in dags if not np.array_equal(pc(test=DSeparationOracle(A)).marks, truth[A.tobytes()])]
        assert not wrong

    def test_independent_variables_give_empty_graph(self, rng):
        assert pc(rng.normal(size=(5000, 2))).n_edges() == 0

    def test_collider_oriented(self, rng):
        x, y = uniform(rng, 5000), uniform(rng, 5000)
        z = x + y + uniform(rng, 5000)
        g = pc(np.column_stack([x, y, z]))
        assert g.directed()[0, 2] and g.directed()[1, 2] and g.n_edges() == 2

    def test_chain_left_undirected(self, rng):
        x = rng.normal(size=5000)
        y = x + rng.normal(size=5000)
        z = y + rng.normal(size=5000)
        g = pc(np.column_stack([x, y, z]))
        assert np.array_equal(g.adjacency(), dag(3, [(0, 1), (1, 0), (1, 2), (2, 1)]))
        assert not g.directed().any()

    def test_marks_are_tails_and_arrows(self):
        r = np.random.default_rng(3)
        for _ in range(20):
            A, _ = random_latent_dag(r, max_latent=0)
            assert set(np.unique(pc(test=DSeparationOracle(A)).marks)) <= {NONE, TAIL, ARROW}


# -- FCI / RFCI -------------------------------------------------------------------

def _marks(g, a, b):
    return g.marks[b, a], g.marks[a, b]  # (mark at a, mark at b)


@pytest.mark.parametrize("algo", [fci, rfci])
class TestPag:
    def test_hidden_common_cause(self, algo):
        g = algo(test=DSeparationOracle(dag(3, [(2, 0), (2, 1)]), observed=[0, 1]))
        assert g.n_edges() == 1
        assert _marks(g, 0, 1) == (CIRCLE, CIRCLE)

    def test_collider_with_child(self, algo):
        g = algo(test=DSeparationOracle(dag(4, [(0, 2), (1, 2), (2, 3)])))
        assert _marks(g, 0, 2) == (CIRCLE, ARROW)
        assert _marks(g, 1, 2) == (CIRCLE, ARROW)
        assert _marks(g, 2, 3) == (TAIL, ARROW)

    def test_bidirected_from_latent(self, algo):
        A = dag(5, [(0, 1), (4, 1), (4, 2), (3, 2)])
        g = algo(test=DSeparationOracle(A, observed=[0, 1, 2, 3]))
        assert _marks(g, 0, 1) == (CIRCLE, ARROW)
        assert _marks(g, 1, 2) == (ARROW, ARROW)
        assert _marks(g, 3, 2) == (CIRCLE, ARROW)

    def test_empty_dependence(self, algo, rng):
        assert algo(rng.normal(size=(3000, 3))).n_edges() == 0

    def test_marks_sound_on_random_latent_dags(self, algo):
        """Arrowheads never point at an ancestor; tails only leave ancestors."""
        r = np.random.default_rng(0)
        for _ in range(100):
            A, obs = random_latent_dag(r, (4, 9))
            R = ancestors(A)
            M = algo(test=DSeparationOracle(A, obs)).marks
            for x in range(len(obs)):
                for y in range(len(obs)):
                    if M[x, y] == ARROW:
                        assert not R[obs[y], obs[x]]
                    if M[x, y] != NONE and M[y, x] == TAIL:
                        assert R[obs[x], obs[y]]

    def test_adjacency_matches_maximal_ancestral_graph(self, algo):
        r = np.random.default_rng(1)
        for _ in range(60):
            A, obs = random_latent_dag(r)
            g = algo(test=DSeparationOracle(A, obs), cfg=ConstraintConfig(max_cond_size=10))
            assert np.array_equal(g.adjacency(), mag_adjacency(A, obs))

    def test_latent_free_skeleton_equals_pc(self, algo):
        r = np.random.default_rng(2)
        for _ in range(30):
            A, _ = random_latent_dag(r, max_latent=0)
            o = DSeparationOracle(A)
            assert np.array_equal(algo(test=o).adjacency(), pc(test=DSeparationOracle(A)).adjacency())


def test_rfci_skeleton_agrees_with_fci_on_data():
    same = 0
    for seed in range(50):
        X, _ = sem_data(5, 2000, seed)
        same += np.array_equal(fci(X).adjacency(), rfci(X).adjacency())
    assert same >= 48


def test_rfci_uses_fewer_tests_on_dense_sem():
    X, _ = sem_data(10, 2000, 0, edge_prob=0.5)
    a, b = FisherZ(X), FisherZ(X)
    fci(test=a)
    rfci(test=b)
    assert b.n_calls < a.n_calls and b.n_tests < a.n_tests


# -- LiNGAM ---------------------------------------------------------------------

class TestLingam:
    def test_two_variable_weight(self, rng):
        x = uniform(rng, 10000)
        y = 0.8 * x + uniform(rng, 10000)
        g = ica_lingam(np.column_stack([x, y]), vertices=["x", "y"])
        assert g.directed()[0, 1] and not g.directed()[1, 0]
        assert g.weights[0, 1] == pytest.approx(0.8, abs=0.05)

    def test_order_recovery(self):
        ok = 0
        for seed in range(50):
            X, sem = sem_data(5, 5000, seed)
            ok += order_consistent(ICALiNGAM().fit(X).causal_order_, sem.dag)
        assert ok >= 45

    def test_upper_mass_small_in_causal_order(self):
        X, sem = sem_data(5, 10000, 7)
        B = ICALiNGAM().fit(X).raw_adjacency_
        order = sem.order
        P = B[np.ix_(order, order)] ** 2
        assert np.triu(P, 1).sum() / P.sum() < 0.05

    def test_gaussian_noise_warns(self, rng):
        X = rng.normal(size=(5000, 3))
        X[:, 1] += 0.5 * X[:, 0]
        with pytest.warns(GaussianDegeneracy):
            ICALiNGAM().fit(X)

    def test_causal_order_brute_force_and_greedy_agree_on_triangular(self, rng):
        for d in (4, 10):
            perm = rng.permutation(d)
            L = np.tril(rng.uniform(0.5, 1.0, (d, d)), -1)
            B = L[np.ix_(np.argsort(perm), np.argsort(perm))]
            order = causal_order(B)
            Bp = B[np.ix_(order, order)]
            assert np.allclose(np.triu(Bp, 1), 0.0)

    def test_output_acyclic(self):
        for seed in range(5):
            X, _ = sem_data(6, 2000, seed)
            g = ica_lingam(X)
            assert g.kind == "weighted_dag" and topological_order(g.directed()) is not None


# -- NOTEARS --------------------------------------------------------------------

class TestAcyclicity:
    def test_zero_matrix(self):
        h, G = acyclicity_h(np.zeros((4, 4)))
        assert h == 0.0 and not G.any()

    def test_two_cycle_closed_form(self):
        h, _ = acyclicity_h(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert h == pytest.approx(2 * math.cosh(1) - 2, abs=1e-12)

    def test_gradient_finite_differences(self, rng):
        for _ in range(5):
            W = rng.uniform(-1, 1, (5, 5))
            W /= max(1.0, np.linalg.norm(W, 2))
            _, G = acyclicity_h(W)
            eps = 1e-6
            num = np.zeros_like(W)
            for i in range(5):
                for j in range(5):
                    E = np.zeros_like(W)
                    E[i, j] = eps
                    num[i, j] = (acyclicity_h(W + E)[0] - acyclicity_h(W - E)[0]) / (2 * eps)
            assert np.linalg.norm(num - G) <= 1e-6 * np.linalg.norm(G)

    def test_lower_triangular_is_acyclic(self, rng):
        W = np.tril(rng.normal(size=(6, 6)), -1)
        assert abs(acyclicity_h(W)[0]) < 1e-12


class TestNotears:
    def test_two_variable_weight(self, rng):
        x = uniform(rng, 10000)
        y = 0.8 * x + uniform(rng, 10000)
        g = notears(np.column_stack([x, y]), lambda1=0.05, vertices=["x", "y"])
        assert g.n_edges() == 1 and g.directed()[0, 1]
        assert g.weights[0, 1] == pytest.approx(0.8, abs=0.1)
        assert g.raw_h < 1e-8

    def test_objective_monotone_at_fixed_penalty(self):
        X, _ = sem_data(4, 1000, 3)
        Xc = X - X.mean(axis=0)
        prob = _Subproblem(Xc.T @ Xc / len(Xc), rho=10.0, alpha=1.0)
        hist = []
        proximal_solve(prob, np.zeros((4, 4)), 0.05, max_iter=300, tol=0.0, history=hist)
        assert len(hist) > 10 and np.all(np.diff(hist) <= 1e-12)

    def test_recovers_small_sem(self):
        X, sem = sem_data(5, 5000, 1)
        est = NOTEARS().fit(X)
        assert est.h_ < 1e-8 and dag_shd(est.W_ != 0, sem.dag) <= 1


@settings(max_examples=8, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(seed=st.integers(0, 10_000), d=st.integers(2, 4))
def test_weighted_outputs_always_acyclic(seed, d):
    X, _ = sem_data(d, 300, seed, edge_prob=0.6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for g in (ica_lingam(X), notears(X)):
            assert topological_order(g.directed()) is not None


# -- suite ----------------------------------------------------------------------

def test_suite_runs_all_and_records_failures(rng):
    X, _ = sem_data(4, 1000, 0)
    out = run_suite(X, vertices=list("abcd"))
    assert set(out.graphs) == {"pc", "fci", "rfci", "lingam", "notears"} and not out.failures
    bad = run_suite(X, algorithms=("pc", "nope"))
    assert "pc" in bad.graphs and "nope" in bad.failures


def test_synth_sem_matches_weights():
    sem = random_sem(4, 0, edge_prob=0.7)
    X = sem.sample(20000, np.random.default_rng(0))
    # least squares of each node on its parents recovers the weights
    for j in range(4):
        pa = np.flatnonzero(sem.dag[:, j])
        if len(pa):
            coef = np.linalg.lstsq(X[:, pa], X[:, j], rcond=None)[0]
            assert np.allclose(coef, sem.W[pa, j], atol=0.05)
