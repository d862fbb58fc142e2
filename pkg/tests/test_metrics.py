import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imblab.errors import ArgumentError, LabelError, MetricError
from imblab.metrics import (
    ConfusionMatrix, accuracy, auc_macro, confusion, evaluate, f_beta, g_mean, precision_recall,
)

from oracles import pair_auc

TABLE = ConfusionMatrix(np.array([[85, 5], [5, 5]]))


class TestConfusion:
    def test_table_cells(self):
        labels = [0] * 90 + [1] * 10
        preds = [0] * 85 + [1] * 5 + [0] * 5 + [1] * 5
        assert confusion(labels, preds, 2).counts.tolist() == [[85, 5], [5, 5]]

    def test_all_correct(self):
        cm = confusion([0, 1, 2, 2], [0, 1, 2, 2], 3)
        assert np.array_equal(cm.counts, np.diag([1, 1, 2]))

    def test_empty(self):
        assert confusion([], [], 3).counts.sum() == 0

    def test_bad_label(self):
        with pytest.raises(LabelError):
            confusion([0, 3], [0, 1], 3)


class TestFBeta:
    def test_table_minority(self):
        per, _ = f_beta(TABLE, 3)
        assert per[1] == pytest.approx(0.5, abs=1e-15)

    def test_perfect(self):
        assert f_beta(ConfusionMatrix(np.diag([3, 4, 5])), 3)[1] == 1.0

    def test_harmonic_mean_at_beta_one(self):
        cm = ConfusionMatrix(np.array([[7, 2, 1], [3, 5, 0], [1, 1, 9]]))
        P, R = precision_recall(cm)
        assert np.allclose(f_beta(cm, 1)[0], 2 * P * R / (P + R), atol=1e-15)

    def test_bad_beta(self):
        with pytest.raises(ArgumentError):
            f_beta(TABLE, 0)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 50), st.integers(0, 50), st.floats(0.1, 10))
    def test_equal_precision_recall(self, tp, err, beta):
        # symmetric off-diagonal errors make P == R for class 0
        cm = ConfusionMatrix(np.array([[tp, err], [err, 10]]))
        P, R = precision_recall(cm)
        assert P[0] == R[0]
        assert f_beta(cm, beta)[0][0] == pytest.approx(R[0], abs=1e-12)


class TestAuc:
    def test_worked_example(self):
        labels = [1, 1, 0, 0]
        scores = np.array([[0.1, 0.9], [0.6, 0.4], [0.4, 0.6], [0.9, 0.1]])
        per, _ = auc_macro(labels, scores)
        assert per[1] == 0.75
        assert pair_auc([0.9, 0.4], [0.6, 0.1]) == 0.75

    def test_perfect(self):
        labels = [0, 0, 1, 1]
        scores = np.array([[0.9, 0.1], [0.8, 0.2], [0.3, 0.7], [0.1, 0.9]])
        assert auc_macro(labels, scores)[1] == 1.0

    def test_constant_scores(self):
        labels = np.array([0, 1, 2, 1, 0, 2, 2])
        assert auc_macro(labels, np.full((7, 3), 1 / 3))[1] == 0.5

    def test_one_class_only(self):
        with pytest.raises(MetricError):
            auc_macro([1, 1], np.array([[0.2, 0.8], [0.3, 0.7]]))

    def test_missing_class_excluded(self, caplog):
        labels = [0, 0, 1, 1]
        scores = np.array([[0.8, 0.1, 0.1], [0.6, 0.3, 0.1], [0.2, 0.7, 0.1], [0.5, 0.4, 0.1]])
        with caplog.at_level(logging.WARNING):
            per, macro = auc_macro(labels, scores)
        assert math.isnan(per[2]) and macro == pytest.approx(np.mean(per[:2]))
        assert "undefined" in caplog.text

    @pytest.mark.parametrize("n,seed", [(20, 0), (137, 1), (500, 2)])
    def test_matches_pair_counting(self, n, seed):
        rng = np.random.default_rng(seed)
        C = 3
        labels = rng.integers(0, C, n)
        scores = np.round(rng.random((n, C)), 2)  # coarse rounding forces ties
        per, macro = auc_macro(labels, scores)
        for c in range(C):
            want = pair_auc(scores[labels == c, c].tolist(), scores[labels != c, c].tolist())
            assert abs(per[c] - want) < 1e-12
        assert abs(macro - np.mean(per)) < 1e-12


class TestGMean:
    def test_all_one(self):
        assert g_mean(ConfusionMatrix(np.diag([3, 4]))) == 1.0

    def test_missed_class(self):
        assert g_mean(ConfusionMatrix(np.array([[5, 0], [3, 0]]))) == 0.0

    def test_example(self):
        assert g_mean(ConfusionMatrix(np.array([[9, 1], [6, 4]]))) == pytest.approx(0.6, abs=1e-15)


class TestAccuracy:
    def test_table(self):
        assert accuracy(TABLE) == 0.9

    def test_diagonal_and_anti(self):
        assert accuracy(ConfusionMatrix(np.diag([2, 2]))) == 1.0
        assert accuracy(ConfusionMatrix(np.array([[0, 3], [4, 0]]))) == 0.0

    def test_empty(self):
        with pytest.raises(MetricError):
            accuracy(ConfusionMatrix(np.zeros((2, 2), dtype=int)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 5), st.integers(5, 60))
def test_ranges_and_class_permutation(seed, C, n):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, C, n)
    labels[:C] = np.arange(C)
    probs = rng.dirichlet(np.ones(C), size=n)
    rep = evaluate(labels, probs)
    for v in (rep.f_beta_macro, rep.auc_macro, rep.gmean, rep.accuracy):
        assert 0.0 <= v <= 1.0
    assert rep.gmean <= np.nanmax(rep.confusion.recalls()) + 1e-15
    perm = rng.permutation(C)
    moved = evaluate(perm[labels], probs[:, np.argsort(perm)])
    assert moved.f_beta_macro == pytest.approx(rep.f_beta_macro, abs=1e-12)
    assert moved.auc_macro == pytest.approx(rep.auc_macro, abs=1e-12)
    assert moved.gmean == pytest.approx(rep.gmean, abs=1e-12)
    assert moved.accuracy == rep.accuracy
