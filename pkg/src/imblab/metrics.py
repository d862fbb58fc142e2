"""Confusion matrices and the evaluation metrics reported for every run.

Macro averages weight every class equally, whatever its size.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import ArgumentError, LabelError, MetricError

log = logging.getLogger(__name__)

__all__ = [
    "ConfusionMatrix",
    "EvalReport",
    "confusion",
    "precision_recall",
    "f_beta",
    "auc_macro",
    "g_mean",
    "accuracy",
    "evaluate",
]


@dataclass
class ConfusionMatrix:
    """Counts with rows = truth and columns = prediction."""

    counts: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def recalls(self) -> np.ndarray:
        """Per-class recall; NaN for classes with no true instances."""
        support = self.counts.sum(axis=1)
        diag = np.diag(self.counts).astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(support > 0, diag / np.maximum(support, 1), np.nan)


def confusion(labels, predictions, C: int) -> ConfusionMatrix:
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if labels.shape != predictions.shape:
        raise LabelError("labels and predictions differ in length")
    for arr in (labels, predictions):
        if arr.size and (arr.min() < 0 or arr.max() >= C):
            raise LabelError(f"class index outside 0..{C - 1}")
    counts = np.zeros((C, C), dtype=np.int64)
    np.add.at(counts, (labels, predictions), 1)
    return ConfusionMatrix(counts)


def precision_recall(cm: ConfusionMatrix):
    """Per-class precision and recall, 0 where the denominator vanishes."""
    diag = np.diag(cm.counts).astype(float)
    col = cm.counts.sum(axis=0)
    row = cm.counts.sum(axis=1)
    precision = np.divide(diag, col, out=np.zeros_like(diag), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros_like(diag), where=row > 0)
    return precision, recall


def f_beta(cm: ConfusionMatrix, beta: float = 3.0):
    """Per-class F-beta and their unweighted mean ``(per_class, macro)``."""
    if not beta > 0:
        raise ArgumentError("beta must be positive")
    P, R = precision_recall(cm)
    b2 = beta * beta
    denom = b2 * P + R
    per_class = np.divide((1 + b2) * P * R, denom, out=np.zeros_like(P), where=denom > 0)
    return per_class, float(per_class.mean()) if per_class.size else 0.0


def _rank_auc(pos_mask: np.ndarray, scores: np.ndarray) -> float:
    ranks = rankdata(scores)
    n_pos = int(pos_mask.sum())
    n_neg = len(scores) - n_pos
    u = ranks[pos_mask].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_macro(labels, scores):
    """One-vs-rest Mann-Whitney AUC per class (ties count one half) and its macro mean.

    Returns ``(per_class, macro)``.  Classes without both positives and
    negatives get NaN and are left out of the macro with a warning.
    """
    labels = np.asarray(labels, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or len(scores) != len(labels):
        raise MetricError("scores must be (B, C) and aligned with labels")
    C = scores.shape[1]
    per_class = np.full(C, np.nan)
    for c in range(C):
        pos = labels == c
        if pos.all() or not pos.any():
            continue
        per_class[c] = _rank_auc(pos, scores[:, c])
    defined = ~np.isnan(per_class)
    if not defined.any():
        raise MetricError("AUC undefined: every instance belongs to one class")
    if not defined.all():
        log.warning("AUC undefined for classes %s; excluded from the macro average",
                    np.flatnonzero(~defined).tolist())
    return per_class, float(per_class[defined].mean())


def g_mean(cm: ConfusionMatrix) -> float:
    """Geometric mean of the recalls of classes that occur; 0 if any recall is 0."""
    r = cm.recalls()
    r = r[~np.isnan(r)]
    if r.size == 0 or np.any(r == 0):
        return 0.0
    return float(np.exp(np.log(r).mean()))


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise MetricError("accuracy of an empty confusion matrix")
    return float(np.trace(cm.counts) / cm.total)


@dataclass
class EvalReport:
    confusion: ConfusionMatrix
    f_beta: np.ndarray
    f_beta_macro: float
    auc: np.ndarray
    auc_macro: float
    gmean: float
    accuracy: float
    wall_time: float = 0.0
    beta: float = 3.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(a):
            return [None if np.isnan(v) else float(v) for v in np.asarray(a, dtype=float)]

        d = {
            "confusion": self.confusion.counts.tolist(),
            "beta": self.beta,
            "f_beta": clean(self.f_beta),
            "f_beta_macro": self.f_beta_macro,
            "auc": clean(self.auc),
            "auc_macro": self.auc_macro,
            "gmean": self.gmean,
            "accuracy": self.accuracy,
            "wall_time": self.wall_time,
        }
        d.update(self.extra)
        return d


def evaluate(labels, probs, n_classes: int | None = None, beta: float = 3.0, wall_time: float = 0.0) -> EvalReport:
    """Score class probabilities ``probs`` (B, C) against true ``labels``."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    C = n_classes or probs.shape[1]
    cm = confusion(labels, probs.argmax(axis=1), C)
    per_f, macro_f = f_beta(cm, beta)
    try:
        per_auc, macro_auc = auc_macro(labels, probs)
    except MetricError:
        per_auc, macro_auc = np.full(C, np.nan), float("nan")
    return EvalReport(cm, per_f, macro_f, per_auc, macro_auc, g_mean(cm), accuracy(cm), wall_time, beta)
