"""Training loops and cross-validation for every imbalance-handling method.

Methods
-------
``unweighted``   plain batches, batch-mean cross entropy
``weighted``     plain batches, per-class averaged cross entropy
``bootstrap``    balanced batches from :func:`plan_bootstrap`, cross entropy
``mfe`` / ``msfe``  plain batches, mean (squared) false error
``gmse``         plain batches, GMSE loss; kappa updated once per epoch
``adaptive_lr``  plain batches, cross entropy, learning rate scaled up by
                 the minority share of each batch
``majority``     no training; always predicts the largest training class
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from .data import ImbalanceSpec, TimeSeriesDataset, apply_imbalance, measure_imbalance, stratified_kfold
from .errors import ImblabError, SpecError, ValidationCoverageError
from .losses import GmseState, LossSpec, compute_H, compute_T, update_kappa
from .metrics import EvalReport, evaluate
from .net import Classifier, Dense, GradientBundle, build_classifier, forward, layers_from_config, loss_and_grad, sgd_step
from .sampling import BootstrapConfig, plan_bootstrap, plan_plain, smote, split_majority_minority, undersample
from .separability import separability_scores

log = logging.getLogger(__name__)

__all__ = [
    "METHODS",
    "HISTORY_COLUMNS",
    "derive_seed",
    "RunConfig",
    "RunResult",
    "holdout_split",
    "train_run",
    "FoldOutcome",
    "CrossvalResult",
    "crossval",
    "history_to_csv",
]

METHODS = ("unweighted", "weighted", "bootstrap", "mfe", "msfe", "gmse", "adaptive_lr", "majority")
_ALIASES = {
    "unweightedce": "unweighted", "unweighted": "unweighted", "ce": "unweighted",
    "weightedce": "weighted", "weighted": "weighted",
    "bootstrap": "bootstrap", "bootstrapping": "bootstrap",
    "mfe": "mfe", "msfe": "msfe", "gmse": "gmse",
    "adaptivelr": "adaptive_lr", "adaptive": "adaptive_lr",
    "majority": "majority", "majoritybaseline": "majority",
}
_DEFAULT_LOSS = {
    "unweighted": "unweighted_ce", "weighted": "weighted_ce", "bootstrap": "unweighted_ce",
    "mfe": "mfe", "msfe": "msfe", "gmse": "gmse", "adaptive_lr": "unweighted_ce", "majority": "unweighted_ce",
}
HISTORY_COLUMNS = ("epoch", "train_loss", "val_f3", "val_auc", "val_gmean", "kappa")
_STOP_METRICS = {"f3": "f_beta_macro", "auc": "auc_macro", "gmean": "gmean", "accuracy": "accuracy"}


def derive_seed(base: int, *keys) -> int:
    """Stable child seed from a base seed and a path of int/str keys.

    Strings are hashed with CRC-32, then everything is mixed by
    ``numpy.random.SeedSequence``.
    """
    words = [int(base) & 0xFFFFFFFF]
    for k in keys:
        words.append(zlib.crc32(k.encode("utf-8")) if isinstance(k, str) else int(k) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def _canonical_method(name: str) -> str:
    key = "".join(ch for ch in str(name).lower() if ch.isalnum())
    if key not in _ALIASES:
        raise SpecError(f"unknown method {name!r}; choose from {METHODS}")
    return _ALIASES[key]


@dataclass
class RunConfig:
    """Everything needed to train one model with one method.

    ``loss`` and ``sampler`` default from ``method``; set them to combine
    pieces differently (e.g. GMSE loss over bootstrap batches).
    """

    method: str = "unweighted"
    name: str | None = None
    epochs: int = 30
    batch_size: int = 32
    lr: float = 0.01
    momentum: float = 0.0
    seed: int = 0
    patience: int | None = 10
    early_stop_metric: str = "f3"
    loss: str | None = None
    sampler: str | None = None
    resample: str = "none"
    gmse_variant: str = "T2"
    lr_kappa: float = 0.1
    kappa0: float = 1.0
    s_n: int | None = None
    s_p: int | None = None
    alpha: float = 1.0
    smote_k: int = 5
    layers: list | None = None
    force: bool = False
    keep_plans: bool = False

    def __post_init__(self):
        self.method = _canonical_method(self.method)
        self.name = self.name or self.method
        if self.epochs < 1:
            raise SpecError("epochs must be >= 1")
        if not (self.lr > 0 and math.isfinite(self.lr)):
            raise SpecError("lr must be positive")
        if self.batch_size < 1:
            raise SpecError("batch_size must be >= 1")
        if not 0 <= self.momentum < 1:
            raise SpecError("momentum must lie in [0, 1)")
        self.loss = (self.loss or _DEFAULT_LOSS[self.method]).lower()
        self.sampler = (self.sampler or ("bootstrap" if self.method == "bootstrap" else "plain")).lower()
        if self.sampler not in ("plain", "bootstrap"):
            raise SpecError(f"unknown sampler {self.sampler!r}")
        if self.resample not in ("none", "undersample", "smote"):
            raise SpecError(f"unknown resample {self.resample!r}")
        if self.early_stop_metric not in _STOP_METRICS:
            raise SpecError(f"early_stop_metric must be one of {sorted(_STOP_METRICS)}")
        if not 0 < self.lr_kappa <= 1:
            raise SpecError("gmse lr_kappa must lie in (0, 1]")
        if self.layers is not None and self.layers and isinstance(self.layers[0], dict):
            self.layers = layers_from_config(self.layers)

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        """Build from nested or dotted keys, e.g. ``{"gmse": {"variant": "T2"}}`` or ``{"gmse.variant": "T2"}``."""
        flat = {}

        def walk(prefix, d):
            for k, v in d.items():
                key = f"{prefix}.{k}" if prefix else str(k)
                if isinstance(v, dict):
                    walk(key, v)
                else:
                    flat[key] = v

        walk("", data)
        renames = {
            "gmse.variant": "gmse_variant", "gmse.lr_kappa": "lr_kappa", "gmse.kappa0": "kappa0",
            "bootstrap.s_n": "s_n", "bootstrap.s_p": "s_p", "adaptive_lr.alpha": "alpha",
            "early_stop.patience": "patience", "early_stop.metric": "early_stop_metric",
            "smote.k_neighbors": "smote_k", "architecture": "layers",
        }
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in flat.items():
            target = renames.get(key, key)
            if target not in known:
                raise SpecError(f"unknown run config key {key!r}")
            kwargs[target] = value
        if kwargs.get("patience") in (0, False):
            kwargs["patience"] = None
        return cls(**kwargs)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "layers"}
        d["layers"] = None if self.layers is None else [type(l).__name__ for l in self.layers]
        return d


@dataclass
class RunResult:
    model: Classifier
    history: list
    wall_time: float
    final_eval: EvalReport
    best_epoch: int
    gmse: GmseState | None = None
    plans: list = field(default_factory=list)


def holdout_split(ds: TimeSeriesDataset, val_fraction: float, seed) -> tuple:
    """Stratified ``(train, val)`` split.

    Each class with at least two instances sends ``max(1, round(n_c * f))``
    of them (but never all) to validation; singleton classes stay in train.
    """
    rng = np.random.default_rng(seed)
    val = np.zeros(len(ds), dtype=bool)
    for c in range(ds.n_classes):
        members = rng.permutation(np.flatnonzero(ds.labels == c))
        if len(members) < 2:
            continue
        take = min(len(members) - 1, max(1, int(math.floor(len(members) * val_fraction + 0.5))))
        val[members[:take]] = True
    return ds.subset(~val), ds.subset(val)


def _resample(ds: TimeSeriesDataset, cfg: RunConfig) -> TimeSeriesDataset:
    if cfg.resample == "undersample":
        return undersample(ds, derive_seed(cfg.seed, "undersample"))
    if cfg.resample == "smote":
        return smote(ds, None, cfg.smote_k, derive_seed(cfg.seed, "smote"))
    return ds


def _metric(report: EvalReport, name: str) -> float:
    v = getattr(report, _STOP_METRICS[name])
    return -math.inf if v is None or math.isnan(v) else v


def _majority_model(model: Classifier, majority_class: int) -> Classifier:
    params = np.zeros_like(model.params)
    last_dense = max(i for i, l in enumerate(model.layers) if isinstance(l, Dense))
    bias = model._slots[last_dense].b_slice
    params[bias.start + majority_class] = 10.0
    return model.with_params(params)


def _predict(model: Classifier, ds: TimeSeriesDataset, chunk: int = 512) -> np.ndarray:
    if len(ds) == 0:
        return np.zeros((0, model.n_classes))
    return np.concatenate([forward(model, ds.values[i:i + chunk]) for i in range(0, len(ds), chunk)])


def _gmse_setup(ds: TimeSeriesDataset, cfg: RunConfig, minority) -> GmseState:
    rho, _ = measure_imbalance(ds)
    present = ds.class_counts() > 0
    labels = ds.labels
    if present.sum() >= 2 and ds.class_counts()[present].min() >= 2:
        s = separability_scores(ds.values, labels)
        S = float(np.mean([s[labels == c].mean() for c in np.flatnonzero(present)]))
    else:
        S = 0.0
        log.warning("separability undefined on this training split; using S=0")
    return GmseState(kappa=cfg.kappa0, H=compute_H(rho, S), target_variant=cfg.gmse_variant,
                     lr_kappa=cfg.lr_kappa, minority_classes=tuple(int(c) for c in minority))


def train_run(ds_train: TimeSeriesDataset, ds_val: TimeSeriesDataset, model: Classifier, cfg: RunConfig) -> RunResult:
    """Train ``model`` on ``ds_train`` with the method in ``cfg``, validating on ``ds_val``.

    Weights are updated after every mini-batch.  For GMSE the minority
    weight is held fixed during an epoch and then moved toward the target
    computed from validation G-Mean and accuracy.  With early stopping the
    returned model carries the weights of the best validation epoch
    (earliest on ties).
    """
    t0 = time.perf_counter()
    train_classes = set(np.flatnonzero(ds_train.class_counts()).tolist())
    val_classes = set(np.flatnonzero(ds_val.class_counts()).tolist())
    missing = sorted(train_classes - val_classes)
    if missing:
        msg = f"validation split lacks classes {missing}; early stopping is unreliable"
        if not cfg.force:
            raise ValidationCoverageError(msg)
        warnings.warn(msg)

    ds_train = _resample(ds_train, cfg)
    counts = ds_train.class_counts()
    majority, minority = split_majority_minority(counts)

    if cfg.method == "majority":
        model = _majority_model(model, int(np.argmax(counts)))
        report = evaluate(ds_val.labels, _predict(model, ds_val), model.n_classes)
        report.wall_time = max(time.perf_counter() - t0, 1e-9)
        return RunResult(model, [], report.wall_time, report, 0)

    gmse = _gmse_setup(ds_train, cfg, minority) if cfg.loss == "gmse" else None
    if cfg.loss in ("mfe", "msfe", "gmse") and len(minority) == 0:
        raise SpecError(f"{cfg.loss} needs a minority class, but the training split is balanced")
    loss = LossSpec(cfg.loss, tuple(minority), gmse, empty_group="zero")
    boot = BootstrapConfig(cfg.s_n or max(1, cfg.batch_size // 2), cfg.s_p) if cfg.sampler == "bootstrap" else None
    minority_set = np.isin(np.arange(ds_train.n_classes), minority)

    velocity = np.zeros_like(model.params)
    history, plans = [], []
    best_score, best_epoch, best_params, best_report = -math.inf, 0, model.params.copy(), None
    since_best = 0
    for epoch in range(cfg.epochs):
        epoch_seed = derive_seed(cfg.seed, "epoch", epoch)
        if boot is not None:
            plan = plan_bootstrap(ds_train, boot, epoch_seed, majority)
        else:
            plan = plan_plain(ds_train, cfg.batch_size, epoch_seed)
        if cfg.keep_plans:
            plans.append(plan)
        kappa_used = gmse.kappa if gmse else float("nan")
        losses = []
        for idx in plan:
            labels = ds_train.labels[idx]
            bundle = loss_and_grad(model, loss, ds_train.values[idx], labels)
            lr = cfg.lr
            if cfg.method == "adaptive_lr":
                lr = cfg.lr * (1.0 + cfg.alpha * minority_set[labels].mean())
            if cfg.momentum:
                velocity = cfg.momentum * velocity + bundle.grad
                step = GradientBundle(bundle.loss, velocity)
            else:
                step = bundle
            model = sgd_step(model, step, lr)
            losses.append(bundle.loss)

        report = evaluate(ds_val.labels, _predict(model, ds_val), model.n_classes)
        target = float("nan")
        if gmse is not None:
            target = compute_T(gmse.target_variant, gmse.H, report.gmean, report.accuracy)
            gmse = update_kappa(gmse, target)
            loss.gmse = gmse
        history.append({
            "epoch": epoch,
            "train_loss": float(np.mean(losses)) if losses else float("nan"),
            "val_f3": report.f_beta_macro,
            "val_auc": report.auc_macro,
            "val_gmean": report.gmean,
            "val_accuracy": report.accuracy,
            "kappa": kappa_used,
            "kappa_target": target,
        })
        score = _metric(report, cfg.early_stop_metric)
        if best_report is None or score > best_score:
            best_score, best_epoch, best_params, best_report = score, epoch, model.params.copy(), report
            since_best = 0
        else:
            since_best += 1
            if cfg.patience and since_best >= cfg.patience:
                break

    if cfg.patience:
        model = model.with_params(best_params)
        final = best_report
    else:
        final, best_epoch = report, len(history) - 1
    wall = max(time.perf_counter() - t0, 1e-9)
    final.wall_time = wall
    return RunResult(model, history, wall, final, best_epoch, gmse, plans)


def history_to_csv(history: Sequence[dict]) -> str:
    """Render a run history as CSV text with the columns in ``HISTORY_COLUMNS``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HISTORY_COLUMNS)
    for row in history:
        w.writerow([row["epoch"]] + [repr(float(row[c])) for c in HISTORY_COLUMNS[1:]])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# cross-validation


@dataclass
class FoldOutcome:
    method: str
    fold: int
    report: EvalReport | None
    history: list
    error: str | None = None


@dataclass
class CrossvalResult:
    dataset: str
    k: int
    separability: float | None
    outcomes: list
    extra: dict = field(default_factory=dict)

    def reports(self, method: str) -> list:
        return [o.report for o in self.outcomes if o.method == method and o.report is not None]

    @property
    def methods(self) -> list:
        seen = []
        for o in self.outcomes:
            if o.method not in seen:
                seen.append(o.method)
        return seen

    @property
    def failures(self) -> list:
        return [o for o in self.outcomes if o.error is not None]

    def summary(self, method: str) -> dict:
        """Mean and population standard deviation across folds of each headline metric."""
        reps = self.reports(method)
        out = {}
        for key, attr in (("f3", "f_beta_macro"), ("auc", "auc_macro"), ("gmean", "gmean"),
                          ("accuracy", "accuracy"), ("time", "wall_time")):
            vals = np.array([getattr(r, attr) for r in reps], dtype=float)
            vals = vals[~np.isnan(vals)]
            out[f"{key}_mean"] = float(vals.mean()) if vals.size else float("nan")
            out[f"{key}_sd"] = float(vals.std()) if vals.size else float("nan")
        return out


def _fold_data(ds, folds, fold, imbalance, seed, val_fraction):
    train_full, test = folds.split(ds, fold)
    if imbalance is not None:
        train_full = apply_imbalance(train_full, replace(imbalance, seed=derive_seed(seed, "imbalance", fold)))
    train, val = holdout_split(train_full, val_fraction, derive_seed(seed, "holdout", fold))
    return train, val, test


def _run_task(task):
    ds, folds, fold, imbalance, seed, val_fraction, cfg = task
    try:
        train, val, test = _fold_data(ds, folds, fold, imbalance, seed, val_fraction)
        run_cfg = replace(cfg, seed=derive_seed(seed, cfg.name, fold, "run"))
        model = build_classifier((ds.n_dims, ds.length), ds.n_classes, cfg.layers,
                                 seed=derive_seed(seed, cfg.name, fold, "init"))
        result = train_run(train, val, model, run_cfg)
        report = evaluate(test.labels, _predict(result.model, test), ds.n_classes,
                          wall_time=result.wall_time)
        report.extra["best_epoch"] = result.best_epoch
        if result.gmse is not None:
            report.extra["kappa_final"] = result.gmse.kappa
            report.extra["H"] = result.gmse.H
        return FoldOutcome(cfg.name, fold, report, result.history)
    except ImblabError as exc:
        log.error("run %s fold %d failed: %s", cfg.name, fold, exc)
        return FoldOutcome(cfg.name, fold, None, [], f"{type(exc).__name__}: {exc}")


def crossval(ds: TimeSeriesDataset, k: int, methods: Sequence[RunConfig], seed: int,
             imbalance: ImbalanceSpec | None = None, val_fraction: float = 0.2, jobs: int = 1,
             separability: float | None = None) -> CrossvalResult:
    """Stratified k-fold comparison of several methods on one dataset.

    For every fold the imbalance recipe (if any) is applied to the training
    portion only, a stratified validation split is carved from it, and each
    method trains a fresh model evaluated on the held-out fold.  All methods
    see identical splits.  With ``k == 1`` the single fold is used for both
    training and evaluation.
    """
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise SpecError("method names must be unique")
    folds = stratified_kfold(ds, k, derive_seed(seed, "folds"))
    tasks = [(ds, folds, f, imbalance, seed, val_fraction, cfg) for cfg in methods for f in range(k)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_task, tasks))
    else:
        outcomes = [_run_task(t) for t in tasks]
    return CrossvalResult(ds.name, k, separability, outcomes)
