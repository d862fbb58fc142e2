"""Class-separability score.

For an instance ``i`` with mean distance ``p`` to the rest of its own class
and mean distance ``n`` to every instance of the other classes (one vs
rest), ``s(i) = (n - p) / max(n, p)``.  The dataset score is the mean over
classes of the per-class mean ``s``, so every class counts equally.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .data import TimeSeriesDataset
from .errors import ArgumentError, DegenerateClassError, PreconditionError

__all__ = [
    "SeparabilityReport",
    "separability_scores",
    "instance_separability",
    "dataset_separability",
]


@dataclass
class SeparabilityReport:
    per_instance: dict
    per_class: dict
    overall: float

    def to_dict(self) -> dict:
        return {"overall": self.overall, "per_class": dict(self.per_class)}


def _check_metric(metric):
    if str(metric).lower() != "euclidean":
        raise ArgumentError(f"unsupported metric {metric!r}; only 'euclidean' is available")


def _check_classes(labels: np.ndarray, names=None):
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise PreconditionError("separability needs at least two classes")
    for c, n in zip(classes, counts):
        if n < 2:
            raise DegenerateClassError(names[c] if names else int(c))
    return classes


def _ratio(n: np.ndarray, p: np.ndarray) -> np.ndarray:
    denom = np.maximum(n, p)
    safe = np.where(denom > 0, denom, 1.0)
    return np.where(denom > 0, (n - p) / safe, 0.0)


def separability_scores(X: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-instance scores for flattened data ``X`` of shape (n, features)."""
    X = np.asarray(X, dtype=np.float64).reshape(len(X), -1)
    labels = np.asarray(labels)
    _check_classes(labels)
    D = squareform(pdist(X, "euclidean"))
    scores = np.empty(len(X))
    for c in np.unique(labels):
        own = labels == c
        n_own = own.sum()
        block = D[own]
        p = block[:, own].sum(axis=1) / (n_own - 1)
        n = block[:, ~own].mean(axis=1)
        scores[own] = _ratio(n, p)
    return scores


def instance_separability(ds: TimeSeriesDataset, i, metric: str = "euclidean") -> float:
    """Score of a single instance, looked up by id (or position if an int)."""
    _check_metric(metric)
    if isinstance(i, (int, np.integer)):
        pos = int(i)
    else:
        hits = np.flatnonzero(ds.ids == str(i))
        if not hits.size:
            raise KeyError(i)
        pos = int(hits[0])
    _check_classes(ds.labels, ds.label_names)
    X = ds.values.reshape(len(ds), -1)
    d = np.sqrt(((X - X[pos]) ** 2).sum(axis=1))
    own = ds.labels == ds.labels[pos]
    own_others = own.copy()
    own_others[pos] = False
    p = d[own_others].mean()
    n = d[~own].mean()
    return float(_ratio(np.array([n]), np.array([p]))[0])


def dataset_separability(ds: TimeSeriesDataset, metric: str = "euclidean") -> SeparabilityReport:
    """Per-instance, per-class and class-balanced overall scores.

    Classes with no instances are ignored; a class with exactly one
    instance raises :class:`DegenerateClassError` naming it.
    """
    _check_metric(metric)
    _check_classes(ds.labels, ds.label_names)
    s = separability_scores(ds.values, ds.labels)
    per_class = {}
    for c in np.unique(ds.labels):
        per_class[ds.label_names[c]] = float(s[ds.labels == c].mean())
    overall = float(np.mean(list(per_class.values())))
    per_instance = dict(zip(ds.ids.tolist(), s.tolist()))
    return SeparabilityReport(per_instance, per_class, overall)
