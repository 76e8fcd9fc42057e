import gzip

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dagfault._rng import Xoshiro256
from dagfault.dataset import (
    Dataset, Scaler, VariableSchema, apply_scaler, fit_scaler, load_csv,
    stratified_kfold, stratified_split, tep_class_names, write_csv,
)
from dagfault.exceptions import ClassTooSmall, EmptyDataset, LabelOutOfRange, MissingColumn


def _write(path, header, rows):
    path.write_text("\n".join([",".join(header)] + [",".join(map(str, r)) for r in rows]) + "\n")


class TestSchema:
    def test_tep_counts(self, schema):
        kinds = [v.kind for v in schema]
        assert len(schema) == 52
        assert kinds.count("manipulated") == 11
        assert kinds.count("continuous_measurement") == 22
        assert kinds.count("sampled_measurement") == 19
        assert len(set(schema.ids)) == 52

    def test_known_entries(self, schema):
        by_id = {v.id: v for v in schema}
        assert by_id["XMV.11"].description == "Condenser cooling water flow"
        assert by_id["XMEAS.17"].description == "Stripper underflow (stream 11)"
        assert by_id["XMEAS.18"].units == "degC"
        assert tep_class_names()[1] == "IDV(1)"

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            VariableSchema.generic(["a", "b", "a"])


class TestLoadCsv:
    def test_three_rows(self, tmp_path, schema):
        rows = [[float(i + j) for j in range(52)] + [lab] for i, lab in enumerate([0, 4, 4])]
        p = tmp_path / "d.csv"
        _write(p, schema.ids + ["fault"], rows)
        ds = load_csv(p, schema, "fault")
        assert ds.n_samples == 3
        assert list(ds.labels) == [0, 4, 4]
        assert ds.ids == schema.ids

    def test_missing_column(self, tmp_path, schema):
        ids = [i for i in schema.ids if i != "XMEAS.17"]
        p = tmp_path / "d.csv"
        _write(p, ids + ["fault"], [[0.0] * 51 + [0]])
        with pytest.raises(MissingColumn) as err:
            load_csv(p, schema)
        assert err.value.name == "XMEAS.17"

    def test_nan_row_dropped(self, tmp_path, schema):
        rows = [[1.0] * 52 + [0], [1.0] * 51 + ["NaN", 1], [2.0] * 52 + [2]]
        p = tmp_path / "d.csv"
        _write(p, schema.ids + ["fault"], rows)
        ds = load_csv(p, schema)
        assert ds.n_samples == 2
        assert ds.dropped_count == 1
        assert list(ds.labels) == [0, 2]

    def test_idv_labels_and_aliases(self, tmp_path):
        schema = VariableSchema.generic(["XMV.1", "XMEAS.2"])
        p = tmp_path / "d.csv"
        _write(p, ["xmv_1", "XMEAS(2)", "fault"], [[1, 2, "IDV(3)"], [3, 4, "normal"], [5, 6, "20"]])
        ds = load_csv(p, schema)
        assert list(ds.labels) == [3, 0, 20]

    def test_label_out_of_range(self, tmp_path):
        schema = VariableSchema.generic(["a"])
        p = tmp_path / "d.csv"
        _write(p, ["a", "fault"], [[1, 0], [2, 21]])
        with pytest.raises(LabelOutOfRange) as err:
            load_csv(p, schema)
        assert err.value.row == 3

    def test_gzip(self, tmp_path):
        schema = VariableSchema.generic(["a", "b"])
        p = tmp_path / "d.csv.gz"
        with gzip.open(p, "wt") as fh:
            fh.write("a,b,fault\n1,2,0\n3,4,1\n")
        assert load_csv(p, schema).n_samples == 2

    def test_empty(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("a,fault\n")
        with pytest.raises(EmptyDataset):
            load_csv(p, VariableSchema.generic(["a"]))

    def test_round_trip_bitwise(self, tmp_path, rng):
        X = rng.standard_normal((40, 5)) * 10.0 ** rng.integers(-8, 8, size=(40, 5))
        ds = Dataset.from_arrays(X, rng.integers(0, 21, 40), ids=list("abcde"))
        p = tmp_path / "rt.csv"
        write_csv(ds, p)
        back = load_csv(p, VariableSchema.generic(list("abcde")))
        assert np.array_equal(back.values, ds.values)
        assert np.array_equal(back.labels, ds.labels)


class TestSplits:
    def _two_class(self, a, b):
        return Dataset.from_arrays(np.arange(a + b, dtype=float)[:, None],
                                   np.r_[np.zeros(a, int), np.ones(b, int)])

    def test_split_proportions(self):
        ds = self._two_class(100, 20)
        train, test = stratified_split(ds, 0.2, seed=7)
        assert test.class_counts() == {0: 20, 1: 4}
        assert train.class_counts() == {0: 80, 1: 16}
        rows = np.r_[train.values[:, 0], test.values[:, 0]]
        assert sorted(rows) == list(range(120))

    def test_split_deterministic(self):
        ds = self._two_class(100, 20)
        a = stratified_split(ds, 0.2, seed=7)[1].values
        b = stratified_split(ds, 0.2, seed=7)[1].values
        c = stratified_split(ds, 0.2, seed=8)[1].values
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_split_class_too_small(self):
        with pytest.raises(ClassTooSmall):
            stratified_split(self._two_class(10, 1), 0.2, 0)

    def test_kfold_divisible(self):
        ds = self._two_class(50, 50)
        for _, valid in stratified_kfold(ds, 5, seed=1):
            assert np.bincount(ds.labels[valid]).tolist() == [10, 10]

    def test_kfold_remainder(self):
        ds = self._two_class(52, 50)
        folds = stratified_kfold(ds, 5, seed=1)
        for _, valid in folds:
            a, b = np.bincount(ds.labels[valid], minlength=2)
            assert a in (10, 11) and b == 10
        allv = np.sort(np.concatenate([v for _, v in folds]))
        assert np.array_equal(allv, np.arange(102))

    def test_kfold_class_too_small(self):
        with pytest.raises(ClassTooSmall):
            stratified_kfold(self._two_class(20, 3), 5, 0)

    @settings(max_examples=40, deadline=None)
    @given(counts=st.lists(st.integers(3, 40), min_size=1, max_size=6),
           k=st.integers(2, 3), seed=st.integers(0, 2**32))
    def test_kfold_balance_property(self, counts, k, seed):
        labels = np.repeat(np.arange(len(counts)), counts)
        folds = stratified_kfold(labels, k, seed)
        per = np.array([np.bincount(labels[v], minlength=len(counts)) for _, v in folds])
        assert (per.max(axis=0) - per.min(axis=0)).max() <= 1
        for tr, va in folds:
            assert len(np.intersect1d(tr, va)) == 0
            assert len(tr) + len(va) == len(labels)


class TestScaler:
    def test_hand_values(self):
        z = Scaler().fit_transform(np.array([[1.0], [2.0], [3.0]]))[:, 0]
        np.testing.assert_allclose(z, [-1.224744871391589, 0.0, 1.224744871391589], atol=1e-12)

    def test_constant_column(self):
        z = Scaler().fit_transform(np.array([[5.0], [5.0], [5.0]]))
        assert np.all(z == 0)

    def test_apply_matches_fit_transform(self, rng):
        ds = Dataset.from_arrays(rng.normal(3, 2, (30, 4)), np.zeros(30))
        s = fit_scaler(ds)
        np.testing.assert_array_equal(apply_scaler(s, ds).values, Scaler().fit_transform(ds.values))

    def test_standardized_moments(self, rng):
        X = rng.normal(10, 5, (200, 6))
        Z = Scaler().fit_transform(X)
        np.testing.assert_allclose(Z.mean(0), 0, atol=1e-9)
        np.testing.assert_allclose(Z.std(0), 1, atol=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(a=st.floats(0.1, 100), b=st.floats(-100, 100), seed=st.integers(0, 1000))
    def test_affine(self, a, b, seed):
        x = np.random.default_rng(seed).normal(size=(50, 1))
        s = Scaler().fit(x)
        # a transformed copy standardises to the same values
        np.testing.assert_allclose(Scaler().fit_transform(a * x + b), s.transform(x), atol=1e-8)
        # the train-fitted transform is affine in its input
        t = s.transform(a * x + b)
        np.testing.assert_allclose(t, a * s.transform(x) + (b + (a - 1) * s.mean_) / s.scale_, atol=1e-6)


def test_xoshiro_reference_vector():
    g = Xoshiro256(state=[1, 2, 3, 4])
    assert [g.next_u64() for _ in range(4)] == [11520, 0, 1509978240, 1215971899390074240]
