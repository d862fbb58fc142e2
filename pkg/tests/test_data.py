import math
import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imblab.data import (
    ImbalanceSpec,
    TimeSeriesDataset,
    apply_imbalance,
    load_dataset,
    measure_imbalance,
    save_dataset,
    stratified_kfold,
    synth_two_patterns,
)
from imblab.errors import DataError, FormatError, PreconditionError, SpecError, StratificationError
from imblab.separability import dataset_separability

from conftest import make_dataset


def write_long_csv(path, rows, length):
    header = "instance_id,label,dim," + ",".join(f"t{j}" for j in range(length))
    path.write_text(header + "\n" + "\n".join(",".join(map(str, r)) for r in rows) + "\n")


class TestLoad:
    def test_basic_motions_shape(self, tmp_path):
        rng = np.random.default_rng(0)
        rows = []
        for i in range(40):
            for d in range(6):
                rows.append([f"s{i}", ["walk", "run", "stand", "badminton"][i % 4], d] + list(rng.random(100)))
        p = tmp_path / "BasicMotions.csv"
        write_long_csv(p, rows, 100)
        ds = load_dataset(p)
        assert ds.shape == (40, 6, 100, 4)
        assert ds.name == "BasicMotions"

    def test_empty_file(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("")
        with pytest.raises(FormatError):
            load_dataset(p)

    def test_text_labels_are_remapped(self, tmp_path):
        p = tmp_path / "pets.csv"
        write_long_csv(p, [["a", "dog", 0, 1, 2], ["b", "cat", 0, 3, 4], ["c", "dog", 0, 5, 7]], 2)
        ds = load_dataset(p, znorm=False)
        assert set(ds.labels.tolist()) == {0, 1}
        assert ds.label_names == ("cat", "dog")
        assert ds.labels.tolist() == [1, 0, 1]

    def test_numeric_labels_sort_numerically(self, tmp_path):
        p = tmp_path / "n.csv"
        write_long_csv(p, [["a", "10", 0, 1], ["b", "2", 0, 2], ["c", "1", 0, 3]], 1)
        ds = load_dataset(p, znorm=False)
        assert ds.label_names == ("1", "2", "10")

    def test_ragged_rows(self, tmp_path):
        p = tmp_path / "ragged.csv"
        p.write_text("instance_id,label,dim,t0,t1\na,x,0,1,2\nb,y,0,1\n")
        with pytest.raises(FormatError):
            load_dataset(p)

    def test_non_finite(self, tmp_path):
        p = tmp_path / "nan.csv"
        write_long_csv(p, [["a", "x", 0, 1, "nan"], ["b", "y", 0, 1, 2]], 2)
        with pytest.raises(DataError):
            load_dataset(p)

    def test_missing_dimension(self, tmp_path):
        p = tmp_path / "dims.csv"
        write_long_csv(p, [["a", "x", 0, 1], ["a", "x", 1, 2], ["b", "y", 0, 3]], 1)
        with pytest.raises(FormatError):
            load_dataset(p)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(FormatError):
            load_dataset(tmp_path / "x.arff", format="arff")

    def test_znorm_default(self, tmp_path):
        p = tmp_path / "z.csv"
        write_long_csv(p, [["a", "x", 0, 1, 2, 3, 4], ["b", "y", 0, 5, 5, 5, 5]], 4)
        ds = load_dataset(p)
        assert np.allclose(ds.values[0, 0].mean(), 0) and np.isclose(ds.values[0, 0].std(), 1)
        assert np.all(ds.values[1, 0] == 0)

    def test_round_trip_is_bit_exact(self, tmp_path):
        ds = make_dataset([3, 4], n_dims=2, length=5)
        p = save_dataset(ds, tmp_path / "rt.csv")
        back = load_dataset(p, znorm=False)
        assert np.array_equal(back.values, ds.values)
        assert back.ids.tolist() == ds.ids.tolist()
        sidecar = json.loads((tmp_path / "rt.labels.json").read_text())
        assert sidecar == {"0": 0, "1": 1}


def test_dataset_invariants():
    with pytest.raises(DataError):
        TimeSeriesDataset(["a"], [0], np.full((1, 1, 2), np.inf), 1)
    with pytest.raises(DataError):
        TimeSeriesDataset(["a", "a"], [0, 0], np.zeros((2, 1, 2)), 1)
    with pytest.raises(DataError):
        TimeSeriesDataset(["a"], [3], np.zeros((1, 1, 2)), 2)
    ds = make_dataset([2, 2])
    with pytest.raises(ValueError):
        ds.values[0, 0, 0] = 1.0


class TestImbalance:
    def test_step_ten_classes_rho_ten(self):
        ds = make_dataset([5000] * 10, length=1)
        out = apply_imbalance(ds, ImbalanceSpec("step", 10, 0.5, seed=3))
        assert sorted(out.class_counts().tolist()) == [500] * 5 + [5000] * 5
        assert measure_imbalance(out) == (10.0, 0.5)

    def test_rho_one_is_identity(self, balanced8):
        out = apply_imbalance(balanced8, ImbalanceSpec("step", 1.0, 0.3, seed=1))
        assert out.class_counts().tolist() == balanced8.class_counts().tolist()

    def test_linear_ten_classes_rho_ten(self):
        ds = make_dataset([5000] * 10, length=1)
        out = apply_imbalance(ds, ImbalanceSpec("linear", 10, seed=5))
        assert sorted(out.class_counts().tolist()) == list(range(500, 5001, 500))

    def test_minority_choice_depends_on_seed(self, balanced8):
        picks = set()
        for seed in range(6):
            out = apply_imbalance(balanced8, ImbalanceSpec("step", 4, 0.5, seed=seed))
            picks.add(tuple(np.flatnonzero(out.class_counts() < 40)))
        assert len(picks) > 1

    def test_deterministic(self, balanced8):
        spec = ImbalanceSpec("step", 4, 0.5, seed=9)
        a, b = apply_imbalance(balanced8, spec), apply_imbalance(balanced8, spec)
        assert a.ids.tolist() == b.ids.tolist()
        assert np.array_equal(a.values, b.values)

    def test_unbalanced_input(self):
        with pytest.raises(PreconditionError):
            apply_imbalance(make_dataset([100, 50]), ImbalanceSpec("step", 2, 0.5))

    def test_zero_minority_count(self):
        with pytest.raises(SpecError):
            apply_imbalance(make_dataset([3, 3]), ImbalanceSpec("step", 10, 0.5))

    @pytest.mark.parametrize("kwargs", [dict(rho=0.5), dict(mu=0.0), dict(mu=1.0), dict(form="zigzag")])
    def test_bad_spec(self, kwargs):
        with pytest.raises(SpecError):
            ImbalanceSpec(**{"form": "step", "rho": 2.0, "mu": 0.5, **kwargs})

    @settings(max_examples=40, deadline=None)
    @given(
        C=st.integers(2, 8),
        per_class=st.integers(10, 60),
        rho=st.floats(1.5, 8.0),
        mu=st.floats(0.05, 0.95),
        seed=st.integers(0, 2**31),
    )
    def test_step_properties(self, C, per_class, rho, mu, seed):
        spec = ImbalanceSpec("step", rho, mu, seed)
        k = math.floor(mu * C + 0.5)
        if k < 1 or k >= C or round(per_class / rho) < 1:
            return
        ds = make_dataset([per_class] * C, length=1, seed=seed % 1000)
        out = apply_imbalance(ds, spec)
        rho_m, mu_m = measure_imbalance(out)
        assert set(out.ids.tolist()) <= set(ds.ids.tolist())
        m = out.class_counts().min()
        assert abs(rho_m - rho) <= rho / m + 1e-12
        if rho_m > 1:
            assert mu_m == k / C


class TestMeasure:
    def test_balanced(self, balanced8):
        assert measure_imbalance(balanced8) == (1.0, 0.0)

    def test_two_class(self):
        assert measure_imbalance(make_dataset([90, 10], length=1)) == (9.0, 0.5)


class TestKFold:
    def test_counting_example(self):
        ds = make_dataset([80, 20], length=1)
        fa = stratified_kfold(ds, 4, seed=0)
        for f in range(4):
            idx = fa.indices(f)
            c = Counter(ds.labels[idx].tolist())
            assert len(idx) == 25
            assert c[1] == 5 and c[0] == 20

    def test_k_one(self):
        ds = make_dataset([7, 3], length=1)
        fa = stratified_kfold(ds, 1, seed=0)
        assert set(fa.folds.tolist()) == {0}
        train, test = fa.split(ds, 0)
        assert len(train) == len(test) == 10

    def test_too_few_instances(self):
        with pytest.raises(StratificationError):
            stratified_kfold(make_dataset([10, 3], length=1), 4, seed=0)

    @settings(max_examples=40, deadline=None)
    @given(counts=st.lists(st.integers(5, 40), min_size=2, max_size=6), k=st.integers(1, 5), seed=st.integers(0, 999))
    def test_partition_properties(self, counts, k, seed):
        ds = make_dataset(counts, length=1)
        fa = stratified_kfold(ds, k, seed)
        assert sorted(np.concatenate([fa.indices(f) for f in range(k)]).tolist()) == list(range(len(ds)))
        assert set(fa.fold_of) == set(ds.ids.tolist())
        sizes = [len(fa.indices(f)) for f in range(k)]
        assert max(sizes) - min(sizes) <= 1
        for c in range(len(counts)):
            per_fold = [int(np.sum(ds.labels[fa.indices(f)] == c)) for f in range(k)]
            assert max(per_fold) - min(per_fold) <= 1
            assert min(per_fold) >= 1
        again = stratified_kfold(ds, k, seed)
        assert np.array_equal(fa.folds, again.folds)


class TestTwoPatterns:
    def test_shape(self):
        ds = synth_two_patterns(250, 128, 0.1, seed=0)
        assert ds.shape == (1000, 1, 128, 4)
        assert ds.class_counts().tolist() == [250] * 4

    def test_noiseless_margin_rule(self):
        ds = synth_two_patterns(20, 64, 0.0, seed=4)
        half = ds.length // 2

        def direction(segment):
            first = segment[np.flatnonzero(segment != 0)[0]]
            return 1 if first < 0 else -1  # up steps start low

        signs = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
        for x, y in zip(ds.values[:, 0], ds.labels):
            assert signs.index((direction(x[:half]), direction(x[half:]))) == y

    def test_separable_enough(self):
        ds = synth_two_patterns(50, 64, 0.5, seed=1)
        assert dataset_separability(ds).overall > 0.2

    def test_seeded(self):
        a = synth_two_patterns(5, 32, 0.5, seed=2)
        b = synth_two_patterns(5, 32, 0.5, seed=2)
        assert np.array_equal(a.values, b.values)

    def test_short_series_rejected(self):
        with pytest.raises(SpecError):
            synth_two_patterns(5, 8, 0.1, seed=0)
