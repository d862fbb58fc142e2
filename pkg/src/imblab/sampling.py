"""Mini-batch planners and data-level resampling (under-sampling, SMOTE).

Batch plans hold row positions into the dataset they were planned for.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .data import TimeSeriesDataset
from .errors import ArgumentError, SamplerError, SmoteError

__all__ = [
    "BatchPlan",
    "BootstrapConfig",
    "split_majority_minority",
    "plan_plain",
    "plan_bootstrap",
    "undersample",
    "smote",
]


@dataclass
class BatchPlan:
    batches: list
    epoch_seed: int

    def __len__(self):
        return len(self.batches)

    def __iter__(self):
        return iter(self.batches)


@dataclass(frozen=True)
class BootstrapConfig:
    """Majority (``s_n``) and minority (``s_p``) samples per balanced batch."""

    s_n: int
    s_p: int | None = None

    def __post_init__(self):
        if self.s_p is None:
            object.__setattr__(self, "s_p", self.s_n)
        if self.s_n < 1 or self.s_p < 1:
            raise ArgumentError("s_n and s_p must both be >= 1")
        if abs(self.s_p - self.s_n) > max(1, 0.2 * self.s_n):
            raise ArgumentError(f"s_p={self.s_p} is too far from s_n={self.s_n}")


def split_majority_minority(counts) -> tuple[np.ndarray, np.ndarray]:
    """Split classes into ``(majority, minority)`` index arrays.

    Classes at or above the median count are majority.  When that marks
    every class as majority although counts differ (e.g. counts 100/25/25),
    every class above the smallest count is majority instead.  Classes with
    no instances are left out of both groups.
    """
    counts = np.asarray(counts)
    present = np.flatnonzero(counts > 0)
    c = counts[present]
    major = c >= np.median(c)
    if major.all() and c.min() != c.max():
        major = c > c.min()
    return present[major], present[~major]


def _rng(seed):
    return np.random.default_rng(seed)


def plan_plain(ds: TimeSeriesDataset | int, batch_size: int, epoch_seed) -> BatchPlan:
    """Seeded shuffle cut into contiguous batches; the last may be short."""
    if batch_size < 1:
        raise ArgumentError("batch_size must be >= 1")
    n = ds if isinstance(ds, (int, np.integer)) else len(ds)
    order = _rng(epoch_seed).permutation(n)
    batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    return BatchPlan(batches, epoch_seed)


def plan_bootstrap(ds: TimeSeriesDataset, cfg: BootstrapConfig, epoch_seed, majority_classes=None) -> BatchPlan:
    """Balanced batches: distinct majority rows plus minority rows drawn with replacement.

    The majority pool (all majority classes together) is shuffled and cut
    into ``floor(n / s_n)`` groups of ``s_n``; the ``n mod s_n`` leftovers
    sit out this epoch.  Each batch then gets ``s_p`` minority rows, split
    as evenly as possible over the minority classes (the remainder goes to
    randomly drawn classes) and drawn uniformly with replacement inside
    each class.  Every batch lists majority rows first.
    """
    counts = ds.class_counts()
    if majority_classes is None:
        majority, minority = split_majority_minority(counts)
    else:
        majority = np.asarray(sorted(set(int(c) for c in majority_classes)))
        minority = np.asarray([c for c in range(ds.n_classes) if counts[c] > 0 and c not in set(majority)])
    major_pool = np.flatnonzero(np.isin(ds.labels, majority))
    minor_pools = [np.flatnonzero(ds.labels == c) for c in minority]
    if not minor_pools:
        raise SamplerError("minority pool is empty")
    n = len(major_pool)
    if n < cfg.s_n:
        raise SamplerError(f"majority pool has {n} rows, fewer than s_n={cfg.s_n}")
    rng = _rng(epoch_seed)
    shuffled = rng.permutation(major_pool)
    n_batches = n // cfg.s_n
    m = len(minor_pools)
    base, extra = divmod(cfg.s_p, m)
    batches = []
    for b in range(n_batches):
        quota = np.full(m, base)
        if extra:
            quota[rng.choice(m, size=extra, replace=False)] += 1
        picks = [rng.choice(pool, size=q, replace=True) for pool, q in zip(minor_pools, quota) if q]
        batches.append(np.concatenate([shuffled[b * cfg.s_n:(b + 1) * cfg.s_n]] + picks))
    return BatchPlan(batches, epoch_seed)


def undersample(ds: TimeSeriesDataset, seed) -> TimeSeriesDataset:
    """Downsample every class, without replacement, to the smallest class count."""
    counts = ds.class_counts()
    present = np.flatnonzero(counts > 0)
    if len(present) < 2:
        raise ArgumentError("undersampling needs at least two classes")
    target = counts[present].min()
    rng = _rng(seed)
    keep = np.zeros(len(ds), dtype=bool)
    for c in present:
        members = np.flatnonzero(ds.labels == c)
        keep[rng.choice(members, size=target, replace=False)] = True
    return ds.subset(keep)


def smote(ds: TimeSeriesDataset, target_count_per_class: int | None = None, k_neighbors: int = 5,
          seed=0) -> TimeSeriesDataset:
    """Oversample classes below the target by interpolating toward near neighbors.

    Each synthetic instance is ``x + u * (x_nn - x)`` where ``x`` is a
    randomly chosen member of the class, ``x_nn`` one of its ``k`` nearest
    same-class neighbors (exact Euclidean search) and ``u ~ U(0, 1)``.
    Synthetic rows are appended after the originals with ids
    ``smote-<class>-<j>``.  The target defaults to the largest class count.
    """
    if k_neighbors < 1:
        raise ArgumentError("k_neighbors must be >= 1")
    counts = ds.class_counts()
    target = int(counts.max() if target_count_per_class is None else target_count_per_class)
    rng = _rng(seed)
    ids, labels, values = [ds.ids], [ds.labels], [ds.values]
    flat = ds.values.reshape(len(ds), -1)
    for c in range(ds.n_classes):
        need = target - counts[c]
        if need <= 0 or counts[c] == 0:
            continue
        if counts[c] < 2:
            raise SmoteError(f"class {ds.label_names[c]!r} has a single instance; nothing to interpolate")
        members = np.flatnonzero(ds.labels == c)
        X = flat[members]
        D = cdist(X, X)
        np.fill_diagonal(D, np.inf)
        k = min(k_neighbors, len(members) - 1)
        neighbors = np.argsort(D, axis=1, kind="stable")[:, :k]
        base = rng.integers(0, len(members), size=need)
        nn = neighbors[base, rng.integers(0, k, size=need)]
        u = rng.random(need)[:, None]
        synth = X[base] + u * (X[nn] - X[base])
        ids.append(np.array([f"smote-{c}-{j}" for j in range(need)]))
        labels.append(np.full(need, c))
        values.append(synth.reshape((need,) + ds.values.shape[1:]))
    return TimeSeriesDataset(
        np.concatenate(ids), np.concatenate(labels), np.concatenate(values),
        ds.n_classes, ds.name, ds.label_names,
    )
