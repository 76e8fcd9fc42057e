import numpy as np
import pytest

from dagfault.dataset import Dataset, Scaler
from dagfault.exceptions import TargetExceedsCount, TooFewSamples
from dagfault.resampling import (
    RebalancePolicy, ResamplePlan, SmoteUndersampler, count_report, random_undersample,
    rebalance, smote,
)


def segment_distance(s, x, z):
    d = z - x
    denom = d @ d
    u = 0.0 if denom == 0 else np.clip((s - x) @ d / denom, 0.0, 1.0)
    return np.linalg.norm(s - (x + u * d))


def brute_knn_sets(Z, k):
    """For every row, all rows within its k-th nearest (other-row) distance (ties kept)."""
    D = np.sqrt(((Z[:, None, :] - Z[None, :, :]) ** 2).sum(-1))
    np.fill_diagonal(D, np.inf)
    out = []
    for i in range(len(Z)):
        kth = np.sort(D[i])[k - 1]
        out.append(np.flatnonzero(D[i] <= kth + 1e-12))
    return out


def check_segments(original: Dataset, result: Dataset, k, standardize=True):
    """Every synthetic row lies on a segment (x, z) with z among x's k NN of the same class."""
    n0 = original.n_samples
    assert np.array_equal(result.values[:n0], original.values)
    Z = Scaler().fit_transform(original.values) if standardize else original.values
    worst = 0.0
    for c in np.unique(result.labels[n0:]):
        idx = np.flatnonzero(original.labels == c)
        X = original.values[idx]
        nbrs = brute_knn_sets(Z[idx], k)
        for s in result.values[n0:][result.labels[n0:] == c]:
            best = min(segment_distance(s, X[i], X[j]) for i in range(len(idx)) for j in nbrs[i])
            worst = max(worst, best)
    return worst


class TestSmote:
    def test_identical_points(self):
        ds = Dataset.from_arrays([[1.0, 2.0], [1.0, 2.0], [9.0, 9.0], [8.0, 9.0]], [1, 1, 0, 0])
        out = smote(ds, ResamplePlan(smote_k=1, targets={1: 4}))
        assert out.class_counts() == {0: 2, 1: 4}
        np.testing.assert_array_equal(out.values[4:], [[1.0, 2.0], [1.0, 2.0]])

    def test_two_points_segment(self):
        ds = Dataset.from_arrays([[0.0, 0.0], [1.0, 1.0]], [1, 1])
        out = smote(ds, ResamplePlan(smote_k=1, targets={1: 3}, standardize=False))
        s = out.values[2]
        assert s[0] == pytest.approx(s[1]) and 0.0 <= s[0] <= 1.0
        assert out.labels[2] == 1

    def test_3d_against_brute_force(self, rng):
        X = np.vstack([rng.normal(size=(10, 3)), rng.normal(5, 1, size=(40, 3))])
        ds = Dataset.from_arrays(X, np.r_[np.ones(10, int), np.zeros(40, int)])
        out = smote(ds, ResamplePlan(smote_k=5, targets={1: 30}, seed=3))
        assert out.class_counts() == {0: 40, 1: 30}
        assert check_segments(ds, out, 5) < 1e-9

    def test_deterministic(self, rng):
        ds = Dataset.from_arrays(rng.normal(size=(20, 2)), np.r_[np.ones(8, int), np.zeros(12, int)])
        plan = ResamplePlan(smote_k=3, targets={1: 20}, seed=11)
        assert np.array_equal(smote(ds, plan).values, smote(ds, plan).values)

    def test_too_few(self):
        ds = Dataset.from_arrays(np.arange(6.0)[:, None], [1, 1, 1, 0, 0, 0])
        with pytest.raises(TooFewSamples):
            smote(ds, ResamplePlan(smote_k=5, targets={1: 10}))

    def test_target_below_count_rejected(self):
        ds = Dataset.from_arrays(np.arange(6.0)[:, None], [1, 1, 1, 0, 0, 0])
        with pytest.raises(ValueError):
            smote(ds, ResamplePlan(smote_k=1, targets={1: 2}))


class TestUndersample:
    def _ds(self):
        return Dataset.from_arrays(np.arange(110.0)[:, None], np.r_[np.zeros(100, int), np.ones(10, int)])

    def test_counts(self):
        out = random_undersample(self._ds(), ResamplePlan(majority_target=50))
        assert out.class_counts() == {0: 50, 1: 10}
        # minority rows untouched, kept rows are a subset of originals in order
        np.testing.assert_array_equal(out.values[out.labels == 1, 0], np.arange(100, 110))
        kept = out.values[out.labels == 0, 0]
        assert np.all(np.diff(kept) > 0) and set(kept) <= set(range(100))

    def test_identity(self):
        ds = self._ds()
        out = random_undersample(ds, ResamplePlan(majority_target=100))
        np.testing.assert_array_equal(out.values, ds.values)

    def test_seeds_differ(self):
        a = random_undersample(self._ds(), ResamplePlan(majority_target=50, seed=1))
        b = random_undersample(self._ds(), ResamplePlan(majority_target=50, seed=2))
        assert a.class_counts() == b.class_counts()
        assert not np.array_equal(a.values, b.values)

    def test_exceeds(self):
        with pytest.raises(TargetExceedsCount):
            random_undersample(self._ds(), ResamplePlan(majority_target=101))


class TestRebalance:
    def test_binary_composition(self, rng):
        ds = Dataset.from_arrays(rng.normal(size=(525, 2)), np.r_[np.zeros(500, int), np.ones(25, int)])
        out = rebalance(ds, ResamplePlan(targets={1: 100}, majority_target=200))
        assert out.class_counts() == {0: 200, 1: 100}

    def test_identity_plan(self, rng):
        ds = Dataset.from_arrays(rng.normal(size=(30, 2)), np.r_[np.zeros(20, int), np.ones(10, int)])
        out = rebalance(ds, ResamplePlan())
        np.testing.assert_array_equal(out.values, ds.values)
        np.testing.assert_array_equal(out.labels, ds.labels)

    def test_tep_like_histogram(self, rng):
        labels = np.r_[np.zeros(200, int), np.repeat(np.arange(1, 21), 20)]
        ds = Dataset.from_arrays(rng.normal(size=(len(labels), 4)), labels)
        plan = ResamplePlan(targets={c: 100 for c in range(1, 21)}, majority_target=150)
        out = rebalance(ds, plan)
        expected = {0: 150, **{c: 100 for c in range(1, 21)}}
        assert out.class_counts() == expected
        assert count_report(ds, out)[3] == (20, 100)

    def test_default_policy(self):
        labels = np.r_[np.zeros(500, int), np.full(25, 1), np.full(40, 2), np.full(30, 3)]
        plan = RebalancePolicy().plan_for(labels, seed=0)
        # median minority count 30 -> target 60; majority -> 2 * 60
        assert plan.targets == {1: 60, 2: 60, 3: 60}
        assert plan.majority_target == 120

    def test_policy_keeps_large_minority(self):
        labels = np.r_[np.zeros(50, int), np.full(10, 1), np.full(100, 2), np.full(12, 3)]
        plan = RebalancePolicy().plan_for(labels)
        assert 2 not in plan.targets
        assert plan.majority_target == 50  # capped at the current count

    def test_sklearn_wrapper(self, rng):
        X = rng.normal(size=(70, 2))
        y = np.r_[np.zeros(60, int), np.ones(10, int)]
        Xr, yr = SmoteUndersampler(smote_k=3).fit_resample(X, y)
        assert np.bincount(yr).tolist() == [40, 20]
