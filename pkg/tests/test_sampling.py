from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imblab.data import TimeSeriesDataset
from imblab.errors import ArgumentError, SamplerError, SmoteError
from imblab.sampling import (
    BootstrapConfig, plan_bootstrap, plan_plain, smote, split_majority_minority, undersample,
)

from conftest import make_dataset


class TestPlain:
    def test_chunks(self):
        assert [len(b) for b in plan_plain(10, 4, 0)] == [4, 4, 2]

    def test_one_batch(self):
        assert len(plan_plain(10, 50, 0)) == 1

    def test_deterministic(self):
        a, b = plan_plain(30, 7, 5), plan_plain(30, 7, 5)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_covers_every_row_once(self):
        ds = make_dataset([6, 5], length=2)
        rows = np.concatenate(plan_plain(ds, 3, 1).batches)
        assert sorted(rows.tolist()) == list(range(11))

    def test_bad_batch_size(self):
        with pytest.raises(ArgumentError):
            plan_plain(10, 0, 0)


class TestSplit:
    def test_median_rule(self):
        major, minor = split_majority_minority([100, 100, 25, 25])
        assert major.tolist() == [0, 1] and minor.tolist() == [2, 3]

    def test_ties_go_to_majority(self):
        major, minor = split_majority_minority([100, 50, 50, 25, 25])
        assert major.tolist() == [0, 1, 2] and minor.tolist() == [3, 4]

    def test_single_large_class(self):
        major, minor = split_majority_minority([100, 25, 25])
        assert major.tolist() == [0] and minor.tolist() == [1, 2]

    def test_absent_classes_ignored(self):
        major, minor = split_majority_minority([0, 90, 10])
        assert major.tolist() == [1] and minor.tolist() == [2]


class TestBootstrap:
    def test_exact_division(self):
        ds = make_dataset([90, 10], length=2)
        plan = plan_bootstrap(ds, BootstrapConfig(10), epoch_seed=0)
        assert len(plan) == 9
        majority = [r for b in plan for r in b[:10]]
        assert Counter(majority) == Counter(range(90))

    def test_leftovers_dropped(self):
        ds = make_dataset([95, 10], length=2)
        plan = plan_bootstrap(ds, BootstrapConfig(10), epoch_seed=0)
        used = {r for b in plan for r in b if ds.labels[r] == 0}
        assert len(plan) == 9 and 95 - len(used) == 5

    def test_singleton_minority(self):
        ds = make_dataset([40, 1], length=2)
        plan = plan_bootstrap(ds, BootstrapConfig(8), epoch_seed=3)
        for b in plan:
            assert b[8:].tolist() == [40] * 8

    def test_multiclass_quota(self):
        ds = make_dataset([60, 60, 10, 10, 10], length=2)
        plan = plan_bootstrap(ds, BootstrapConfig(10), epoch_seed=1)
        for b in plan:
            per = Counter(ds.labels[b[10:]].tolist())
            assert sum(per.values()) == 10
            assert max(per.values()) - min(per[c] for c in (2, 3, 4)) <= 1

    def test_empty_minority(self):
        ds = make_dataset([20, 20], length=2)
        with pytest.raises(SamplerError):
            plan_bootstrap(ds, BootstrapConfig(5), 0, majority_classes=[0, 1])

    def test_small_majority(self):
        with pytest.raises(SamplerError):
            plan_bootstrap(make_dataset([8, 2], length=2), BootstrapConfig(10), 0)

    @pytest.mark.parametrize("s_n,s_p", [(0, 1), (10, 13), (3, 5)])
    def test_bad_config(self, s_n, s_p):
        with pytest.raises(ArgumentError):
            BootstrapConfig(s_n, s_p)

    @settings(max_examples=40, deadline=None)
    @given(n_major=st.integers(10, 80), n_minor=st.integers(1, 9), s_n=st.integers(1, 10), seed=st.integers(0, 9999))
    def test_invariants(self, n_major, n_minor, s_n, seed):
        ds = make_dataset([n_major, n_minor], length=1)
        cfg = BootstrapConfig(s_n)
        plan = plan_bootstrap(ds, cfg, seed)
        assert len(plan) == n_major // s_n
        seen = Counter()
        for b in plan:
            assert len(b) == cfg.s_n + cfg.s_p
            assert np.all(ds.labels[b[:s_n]] == 0) and np.all(ds.labels[b[s_n:]] == 1)
            seen.update(b[:s_n].tolist())
        assert max(seen.values()) == 1
        again = plan_bootstrap(ds, cfg, seed)
        assert all(np.array_equal(x, y) for x, y in zip(plan, again))


class TestUndersample:
    def test_counts(self):
        ds = make_dataset([100, 25], length=2)
        out = undersample(ds, 0)
        assert out.class_counts().tolist() == [25, 25]
        assert set(out.ids.tolist()) <= set(ds.ids.tolist())

    def test_balanced_unchanged(self):
        ds = make_dataset([12, 12, 12], length=2)
        assert undersample(ds, 4).class_counts().tolist() == [12, 12, 12]


def on_segment(p, a, b, tol=1e-9):
    """Whether p lies on the closed segment a-b."""
    d = b - a
    denom = d @ d
    if denom == 0:
        return np.max(np.abs(p - a)) <= tol
    u = np.clip((p - a) @ d / denom, 0, 1)
    return np.max(np.abs(a + u * d - p)) <= tol


class TestSmote:
    def test_counts_and_segments(self):
        ds = make_dataset([100, 25], n_dims=2, length=3, seed=1)
        out = smote(ds, 100, k_neighbors=5, seed=2)
        assert out.class_counts().tolist() == [100, 100]
        real = ds.values[ds.labels == 1].reshape(25, -1)
        synth = out.values[len(ds):].reshape(75, -1)
        for p in synth:
            assert any(on_segment(p, real[i], real[j]) for i in range(25) for j in range(25) if i != j)

    def test_identical_pair(self):
        values = np.zeros((12, 1, 4))
        values[10:] = 3.0
        ds = TimeSeriesDataset([f"x{i}" for i in range(12)], [0] * 10 + [1] * 2, values, 2)
        out = smote(ds, seed=0)
        assert np.all(out.values[out.labels == 1] == 3.0)

    def test_singleton(self):
        with pytest.raises(SmoteError):
            smote(make_dataset([10, 1], length=2))

    def test_original_rows_first(self):
        ds = make_dataset([10, 4], length=2)
        out = smote(ds, seed=1)
        assert out.ids[:14].tolist() == ds.ids.tolist()
        assert out.ids[14].startswith("smote-1-")
