"""Time-series datasets: loading, imbalancing, stratified folds and synthetic data.

A dataset is held as three aligned arrays (``ids``, ``labels``, ``values``),
with ``values`` shaped ``(n_instances, n_dims, length)``.  Datasets are
treated as immutable; every operation returns a new one.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import DataError, FormatError, PreconditionError, SpecError, StratificationError

__all__ = [
    "Instance",
    "TimeSeriesDataset",
    "ImbalanceSpec",
    "FoldAssignment",
    "load_dataset",
    "save_dataset",
    "znormalize",
    "apply_imbalance",
    "measure_imbalance",
    "stratified_kfold",
    "synth_two_patterns",
    "synth_blobs",
    "round_half_up",
]

BALANCE_TOLERANCE = 1.2


def round_half_up(x: float) -> int:
    """Round to nearest integer, halves away from zero (for x >= 0)."""
    return int(math.floor(x + 0.5))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Instance:
    id: str
    label: int
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class TimeSeriesDataset:
    """Labeled, fixed-length, multi-dimensional series.

    Parameters
    ----------
    ids : array of str, shape (n,)
    labels : array of int, shape (n,)
        Dense class indices ``0..n_classes-1``.
    values : array of float, shape (n, n_dims, length)
    n_classes : int
    name : str
    label_names : tuple of str
        Original label text for each dense index.
    """

    ids: np.ndarray
    labels: np.ndarray
    values: np.ndarray
    n_classes: int
    name: str = "dataset"
    label_names: tuple = field(default=())

    def __post_init__(self):
        ids = np.asarray(self.ids).astype(str)
        labels = np.asarray(self.labels, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3:
            raise DataError(f"values must be 3-D (n, n_dims, length), got shape {values.shape}")
        if not (len(ids) == len(labels) == values.shape[0]):
            raise DataError("ids, labels and values disagree on the number of instances")
        if len(set(ids.tolist())) != len(ids):
            raise DataError("instance ids are not unique")
        if not np.all(np.isfinite(values)):
            raise DataError("values contain NaN or inf")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise DataError("labels must lie in 0..n_classes-1")
        names = tuple(self.label_names) or tuple(str(c) for c in range(self.n_classes))
        if len(names) != self.n_classes:
            raise DataError("label_names must have one entry per class")
        object.__setattr__(self, "ids", _readonly(ids))
        object.__setattr__(self, "labels", _readonly(labels))
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "label_names", names)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_dims(self) -> int:
        return self.values.shape[1]

    @property
    def length(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> tuple:
        """``(n_instances, n_dims, length, n_classes)``."""
        return (len(self), self.n_dims, self.length, self.n_classes)

    @property
    def instances(self) -> Iterator[Instance]:
        for i in range(len(self)):
            yield Instance(self.ids[i], int(self.labels[i]), self.values[i])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, index, name: str | None = None) -> "TimeSeriesDataset":
        """Return the instances at ``index`` (boolean mask or positions), same classes."""
        index = np.asarray(index)
        return TimeSeriesDataset(
            self.ids[index],
            self.labels[index],
            self.values[index],
            self.n_classes,
            name or self.name,
            self.label_names,
        )

    def check_all_classes_present(self):
        missing = np.flatnonzero(self.class_counts() == 0)
        if missing.size:
            raise DataError(f"classes {missing.tolist()} have no instances")


# ---------------------------------------------------------------------------
# Long CSV I/O


def _label_sort_key(text: str):
    try:
        return (0, float(text), text)
    except ValueError:
        return (1, 0.0, text)


def load_dataset(path, format: str = "long_csv", znorm: bool = True) -> TimeSeriesDataset:
    """Read a dataset from a Long CSV file.

    The header is ``instance_id,label,dim,t0,...,t{L-1}`` and each row holds
    one dimension of one instance.  Labels are remapped to dense indices in
    sorted order (numerically when every label parses as a number); the
    mapping is kept in ``label_names``.

    Raises
    ------
    FormatError
        Empty file, bad header, ragged rows, missing dimensions, unknown format.
    DataError
        Non-finite or unparsable values.
    """
    if format.lower().replace("_", "") != "longcsv":
        raise FormatError(f"unknown dataset format {format!r}")
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header[:3] != ["instance_id", "label", "dim"] or len(header) < 4:
        raise FormatError(f"{path}: header must start with instance_id,label,dim,t0")
    length = len(header) - 3
    if header[3:] != [f"t{j}" for j in range(length)]:
        raise FormatError(f"{path}: time columns must be named t0..t{length - 1}")
    if len(rows) == 1:
        raise FormatError(f"{path}: no data rows")

    series: dict[str, dict[int, list[float]]] = {}
    label_of: dict[str, str] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != length + 3:
            raise FormatError(f"{path}:{lineno}: expected {length + 3} fields, got {len(row)}")
        iid, label, dim = row[0], row[1], row[2]
        try:
            d = int(dim)
        except ValueError:
            raise FormatError(f"{path}:{lineno}: dim {dim!r} is not an integer") from None
        try:
            vals = [float(v) for v in row[3:]]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in vals):
            raise DataError(f"{path}:{lineno}: non-finite value")
        if iid in label_of and label_of[iid] != label:
            raise FormatError(f"{path}:{lineno}: instance {iid!r} has conflicting labels")
        label_of[iid] = label
        dims = series.setdefault(iid, {})
        if d in dims:
            raise FormatError(f"{path}:{lineno}: duplicate dim {d} for instance {iid!r}")
        dims[d] = vals

    n_dims = max(len(d) for d in series.values())
    for iid, dims in series.items():
        if sorted(dims) != list(range(n_dims)):
            raise FormatError(f"{path}: instance {iid!r} does not have dims 0..{n_dims - 1}")

    ids = list(series)
    names = sorted(set(label_of.values()), key=_label_sort_key)
    index = {name: i for i, name in enumerate(names)}
    values = np.array([[series[i][d] for d in range(n_dims)] for i in ids], dtype=np.float64)
    labels = np.array([index[label_of[i]] for i in ids], dtype=np.int64)
    ds = TimeSeriesDataset(ids, labels, values, len(names), path.stem, tuple(names))
    return znormalize(ds) if znorm else ds


def save_dataset(ds: TimeSeriesDataset, path, write_labels: bool = True) -> Path:
    """Write ``ds`` as Long CSV plus a ``<name>.labels.json`` sidecar.

    Floats are written with ``repr`` so a reload is bit-exact.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["instance_id", "label", "dim"] + [f"t{j}" for j in range(ds.length)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(ds)):
            label = ds.label_names[ds.labels[i]]
            for d in range(ds.n_dims):
                w.writerow([ds.ids[i], label, d] + [repr(float(v)) for v in ds.values[i, d]])
    if write_labels:
        sidecar = path.with_name(path.stem + ".labels.json")
        mapping = {name: i for i, name in enumerate(ds.label_names)}
        sidecar.write_text(json.dumps(mapping, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def znormalize(ds: TimeSeriesDataset) -> TimeSeriesDataset:
    """Standardize every (instance, dimension) series to zero mean, unit variance.

    Constant series are only centered.
    """
    v = ds.values
    mean = v.mean(axis=2, keepdims=True)
    sd = v.std(axis=2, keepdims=True)
    sd = np.where(sd > 0, sd, 1.0)
    return TimeSeriesDataset(ds.ids, ds.labels, (v - mean) / sd, ds.n_classes, ds.name, ds.label_names)


# ---------------------------------------------------------------------------
# Imbalance


@dataclass(frozen=True)
class ImbalanceSpec:
    """Recipe for an imbalanced subset.

    ``form`` is ``"step"`` or ``"linear"``; ``mu`` is only used by step.
    """

    form: str = "step"
    rho: float = 4.0
    mu: float = 0.5
    seed: int = 0

    def __post_init__(self):
        form = self.form.lower()
        if form not in ("step", "linear"):
            raise SpecError(f"unknown imbalance form {self.form!r}")
        object.__setattr__(self, "form", form)
        if not (math.isfinite(self.rho) and self.rho >= 1):
            raise SpecError(f"rho must be >= 1, got {self.rho}")
        if form == "step" and not (0 < self.mu < 1):
            raise SpecError(f"mu must lie in (0, 1), got {self.mu}")

    def n_minority(self, n_classes: int) -> int:
        k = round_half_up(self.mu * n_classes)
        if k < 1:
            raise SpecError(f"mu={self.mu} with {n_classes} classes selects no minority class")
        if k >= n_classes:
            raise SpecError(f"mu={self.mu} with {n_classes} classes leaves no majority class")
        return k


def _target_counts(counts: np.ndarray, spec: ImbalanceSpec, rng: np.random.Generator) -> np.ndarray:
    C = len(counts)
    top = int(counts.max())
    targets = counts.copy()
    if spec.form == "step":
        k = spec.n_minority(C)
        minority = rng.choice(C, size=k, replace=False)
        majority_top = int(np.delete(counts, minority).max())
        m = round_half_up(majority_top / spec.rho)
        targets[minority] = np.minimum(counts[minority], m)
    else:
        order = rng.permutation(C)
        lo = top / spec.rho
        for rank, c in enumerate(order):
            frac = rank / (C - 1) if C > 1 else 1.0
            targets[c] = min(int(counts[c]), round_half_up(lo + (top - lo) * frac))
    return targets


def apply_imbalance(ds: TimeSeriesDataset, spec: ImbalanceSpec) -> TimeSeriesDataset:
    """Subsample a (roughly) balanced dataset into a step or linear imbalance.

    Step: ``round(mu * C)`` classes drawn by the seeded RNG shrink to
    ``round(max_majority / rho)`` instances; other classes are untouched.
    Linear: classes, in a seeded random order, keep counts interpolated
    linearly from ``max / rho`` up to ``max``.  Within a class the kept
    instances are a seeded uniform draw without replacement, listed in
    their original order.
    """
    counts = ds.class_counts()
    if counts.min() == 0:
        raise PreconditionError("every class needs at least one instance")
    if counts.max() / counts.min() > BALANCE_TOLERANCE:
        raise PreconditionError(
            f"input is not balanced: max/min class count {counts.max() / counts.min():.3f} "
            f"exceeds {BALANCE_TOLERANCE}"
        )
    rng = np.random.default_rng(spec.seed)
    targets = _target_counts(counts, spec, rng)
    if targets.min() < 1:
        raise SpecError(f"rho={spec.rho} leaves a class with zero instances")
    keep = np.zeros(len(ds), dtype=bool)
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == c)
        chosen = rng.choice(members, size=int(targets[c]), replace=False)
        keep[chosen] = True
    return ds.subset(keep)


def measure_imbalance(ds: TimeSeriesDataset) -> tuple[float, float]:
    """Return ``(rho, mu)``: max/min class count and fraction of classes below the max."""
    counts = ds.class_counts()
    present = counts[counts > 0]
    if present.size == 0:
        return 1.0, 0.0
    rho = float(present.max() / present.min())
    mu = float(np.count_nonzero(counts < counts.max()) / ds.n_classes)
    return rho, mu


# ---------------------------------------------------------------------------
# Stratified folds


@dataclass(frozen=True)
class FoldAssignment:
    """Partition of a dataset into ``k`` stratified folds.

    ``fold_of`` maps instance id to fold index; ``folds`` holds the same
    information as a positional array aligned with the dataset.
    """

    k: int
    folds: np.ndarray
    ids: np.ndarray

    @property
    def fold_of(self) -> dict:
        return dict(zip(self.ids.tolist(), self.folds.tolist()))

    def indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds == fold)

    def split(self, ds: TimeSeriesDataset, fold: int):
        """Return ``(train, test)`` for one fold; with ``k == 1`` both are the whole set."""
        test = self.folds == fold
        if self.k == 1:
            return ds, ds
        return ds.subset(~test), ds.subset(test)


def stratified_kfold(ds: TimeSeriesDataset, k: int, seed: int) -> FoldAssignment:
    """Assign instances to ``k`` folds, class by class.

    Each class is shuffled and dealt round-robin; the starting fold rotates
    between classes so total fold sizes also differ by at most one.
    """
    if k < 1:
        raise StratificationError(f"k must be >= 1, got {k}")
    counts = ds.class_counts()
    for c, n in enumerate(counts):
        if 0 < n < k:
            raise StratificationError(
                f"class {ds.label_names[c]!r} has {n} instances, fewer than k={k} folds"
            )
    rng = np.random.default_rng(seed)
    folds = np.zeros(len(ds), dtype=np.int64)
    offset = 0
    for c in range(ds.n_classes):
        members = rng.permutation(np.flatnonzero(ds.labels == c))
        folds[members] = (np.arange(len(members)) + offset) % k
        offset = (offset + len(members)) % k
    return FoldAssignment(k, folds, np.array(ds.ids))


# ---------------------------------------------------------------------------
# Synthetic generators

_PATTERN_SIGNS = [(1, 1), (1, -1), (-1, 1), (-1, -1)]


def _step_pattern(width: int, direction: int) -> np.ndarray:
    half = width // 2
    p = np.concatenate([-np.ones(half), np.ones(width - half)])
    return p * direction


def synth_two_patterns(
    n_per_class: int, length: int, noise_sd: float, seed: int, name: str = "two_patterns"
) -> TimeSeriesDataset:
    """Four-class, one-dimensional stand-in for the simulated TwoPatterns set.

    Every series carries two step patterns, one in each half.  A pattern is
    "up" (-1 then +1) or "down" (+1 then -1); the class is the ordered pair
    (up/up, up/down, down/up, down/down).  Patterns are one quarter of the
    series long and placed at a random offset that jitters by up to an
    eighth of the pattern width, on a background of ``noise_sd`` Gaussian noise.
    Labels are dealt in order ``0,1,2,3,0,1,...``.
    """
    if length < 16:
        raise SpecError(f"length must be >= 16, got {length}")
    rng = np.random.default_rng(seed)
    width = length // 4
    jitter = max(1, width // 8)
    half = length // 2
    base = (half - width) // 2
    n = 4 * n_per_class
    labels = np.arange(n) % 4
    values = noise_sd * rng.standard_normal((n, 1, length))
    for i in range(n):
        first, second = _PATTERN_SIGNS[labels[i]]
        for start0, sign in ((base, first), (half + base, second)):
            start = start0 + int(rng.integers(-jitter, jitter + 1))
            values[i, 0, start:start + width] += _step_pattern(width, sign)
    ids = [f"tp{i:05d}" for i in range(n)]
    names = ("up-up", "up-down", "down-up", "down-down")
    return TimeSeriesDataset(ids, labels, values, 4, name, names)


def synth_blobs(
    n_per_class: Sequence[int], length: int, spread: float, distance: float, seed: int,
    name: str = "blobs",
) -> TimeSeriesDataset:
    """Gaussian blobs along the first axis: class ``c`` is centered at ``c * distance``."""
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(n_per_class)), n_per_class)
    values = spread * rng.standard_normal((len(labels), 1, length))
    values[:, 0, 0] += labels * distance
    ids = [f"b{i:05d}" for i in range(len(labels))]
    return TimeSeriesDataset(ids, labels, values, len(n_per_class), name)
