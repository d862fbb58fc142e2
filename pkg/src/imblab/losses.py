"""Loss functions for imbalanced classification, each returning ``(value, d value / d probs)``.

Included: plain and per-class weighted cross entropy, MSE, mean false
error (MFE), mean squared false error (MSFE) and the global mean squared
error (GMSE) whose minority weight ``kappa`` is learned once per epoch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ArgumentError, GroupError, LabelError, ShapeError, SpecError

__all__ = [
    "CLAMP",
    "LOSS_KINDS",
    "LossSpec",
    "GmseState",
    "one_hot",
    "unweighted_ce",
    "weighted_ce",
    "mse_loss",
    "false_errors",
    "mfe_loss",
    "msfe_loss",
    "gmse_loss",
    "compute_H",
    "compute_T",
    "update_kappa",
]

CLAMP = 1e-12
LOSS_KINDS = ("unweighted_ce", "weighted_ce", "mse", "mfe", "msfe", "gmse")
T_VARIANTS = ("T1", "T2", "T3")


def _check_labels(probs: np.ndarray, labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if probs.ndim != 2 or labels.shape != (probs.shape[0],):
        raise ShapeError(f"probs {probs.shape} and labels {labels.shape} do not align")
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise LabelError(f"labels must lie in 0..{probs.shape[1] - 1}")
    return labels


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise LabelError(f"labels must lie in 0..{n_classes - 1}")
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def _per_sample_ce(probs: np.ndarray, labels: np.ndarray):
    """Per-sample ``-log p_true`` and its derivative w.r.t. ``p_true``."""
    rows = np.arange(len(labels))
    p = probs[rows, labels]
    clipped = np.clip(p, CLAMP, 1.0 - CLAMP)
    dp = np.where((p >= CLAMP) & (p <= 1.0 - CLAMP), -1.0 / clipped, 0.0)
    return -np.log(clipped), dp


def unweighted_ce(probs, labels):
    """Batch mean of categorical cross entropy."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = _check_labels(probs, labels)
    B = len(labels)
    grad = np.zeros_like(probs)
    if B == 0:
        return 0.0, grad
    ce, dp = _per_sample_ce(probs, labels)
    grad[np.arange(B), labels] = dp / B
    return float(ce.mean()), grad


def weighted_ce(probs, labels):
    """Cross entropy averaged within each class present, then across those classes.

    A class with ``N_c`` samples in the batch gives each of them weight
    ``1 / (N_c * n_present_classes)``.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = _check_labels(probs, labels)
    grad = np.zeros_like(probs)
    if len(labels) == 0:
        return 0.0, grad
    counts = np.bincount(labels, minlength=probs.shape[1])
    n_present = np.count_nonzero(counts)
    w = 1.0 / (counts[labels] * n_present)
    ce, dp = _per_sample_ce(probs, labels)
    grad[np.arange(len(labels)), labels] = w * dp
    per_class = np.bincount(labels, weights=ce, minlength=probs.shape[1])
    present = counts > 0
    value = float(np.mean(per_class[present] / counts[present]))
    return value, grad


def _check_pair(probs, onehots):
    probs = np.asarray(probs, dtype=np.float64)
    onehots = np.asarray(onehots, dtype=np.float64)
    if probs.shape != onehots.shape or probs.ndim != 2:
        raise ShapeError(f"predictions {probs.shape} and targets {onehots.shape} differ")
    return probs, onehots


def mse_loss(probs, onehots):
    """``(1/M) * sum_i sum_n 0.5 * (d - y)^2`` over M samples."""
    probs, onehots = _check_pair(probs, onehots)
    M = len(probs)
    if M == 0:
        return 0.0, np.zeros_like(probs)
    diff = probs - onehots
    return float(0.5 * (diff ** 2).sum() / M), diff / M


def _positive_mask(onehots: np.ndarray, positive_class) -> np.ndarray:
    positives = np.atleast_1d(np.asarray(positive_class, dtype=np.int64))
    return np.isin(onehots.argmax(axis=1), positives)


def false_errors(probs, onehots, positive_class, empty_group: str = "raise"):
    """Return ``(FPE, FNE, dFPE, dFNE)``.

    FPE is the mean half-squared error over negative (majority) samples and
    FNE the same over positive (minority) samples.  ``positive_class`` may
    be a single index or a collection of minority classes.  With
    ``empty_group="zero"`` a missing group contributes 0 instead of raising.
    """
    probs, onehots = _check_pair(probs, onehots)
    pos = _positive_mask(onehots, positive_class)
    neg = ~pos
    P, N = int(pos.sum()), int(neg.sum())
    if (P == 0 or N == 0) and empty_group != "zero":
        raise GroupError(f"batch has {P} positive and {N} negative samples; both groups are required")
    diff = probs - onehots
    err = 0.5 * (diff ** 2).sum(axis=1)
    d_fpe = np.zeros_like(probs)
    d_fne = np.zeros_like(probs)
    fpe = fne = 0.0
    if N:
        fpe = float(err[neg].sum() / N)
        d_fpe[neg] = diff[neg] / N
    if P:
        fne = float(err[pos].sum() / P)
        d_fne[pos] = diff[pos] / P
    return fpe, fne, d_fpe, d_fne


def mfe_loss(probs, onehots, positive_class, empty_group: str = "raise"):
    """Mean false error ``FPE + FNE``."""
    fpe, fne, d_fpe, d_fne = false_errors(probs, onehots, positive_class, empty_group)
    return fpe + fne, d_fpe + d_fne


def msfe_loss(probs, onehots, positive_class, empty_group: str = "raise"):
    """Mean squared false error ``FPE**2 + FNE**2``."""
    fpe, fne, d_fpe, d_fne = false_errors(probs, onehots, positive_class, empty_group)
    return fpe ** 2 + fne ** 2, 2 * fpe * d_fpe + 2 * fne * d_fne


@dataclass
class GmseState:
    """Learnable minority weight and the constants that drive it.

    ``H`` is fixed at run start from the training imbalance ratio and
    separability; ``kappa`` moves toward a target once per epoch.
    """

    kappa: float = 1.0
    H: float = 0.0
    target_variant: str = "T2"
    lr_kappa: float = 0.1
    minority_classes: tuple = field(default=())

    def __post_init__(self):
        self.target_variant = str(self.target_variant).upper()
        if self.target_variant not in T_VARIANTS:
            raise SpecError(f"unknown target variant {self.target_variant!r}")
        if not math.isfinite(self.kappa) or self.kappa < 0:
            raise SpecError(f"kappa must be finite and >= 0, got {self.kappa}")
        self.minority_classes = tuple(int(c) for c in self.minority_classes)


def gmse_loss(probs, onehots, labels, state: GmseState):
    """``(1/n) * sum_p w_p * ||d_p - y_p||^2`` with ``w_p = kappa`` for minority samples, else 1."""
    probs, onehots = _check_pair(probs, onehots)
    if not math.isfinite(state.kappa):
        raise SpecError("kappa is not finite")
    if not state.minority_classes:
        raise SpecError("GMSE needs at least one minority class")
    labels = _check_labels(probs, labels)
    n = len(probs)
    if n == 0:
        return 0.0, np.zeros_like(probs)
    w = np.where(np.isin(labels, state.minority_classes), state.kappa, 1.0)
    diff = probs - onehots
    value = float((w * (diff ** 2).sum(axis=1)).sum() / n)
    return value, 2.0 * w[:, None] * diff / n


def compute_H(IR: float, S: float) -> float:
    """Maximum minority cost ``IR * (1 + S)``."""
    return IR * (1.0 + S)


def compute_T(variant: str, H: float, gmean: float, accuracy: float) -> float:
    """Target for kappa.

    T1 damps ``H`` by G-Mean and accuracy, T2 by G-Mean alone and T3 by
    G-Mean and the error rate ``1 - accuracy``.
    """
    variant = str(variant).upper()
    base = H * math.exp(-gmean / 2)
    if variant == "T1":
        return base * math.exp(-accuracy / 2)
    if variant == "T2":
        return base
    if variant == "T3":
        return base * math.exp(-(1 - accuracy) / 2)
    raise SpecError(f"unknown target variant {variant!r}")


def update_kappa(state: GmseState, T: float) -> GmseState:
    """One gradient step on ``||T - kappa||^2``: ``kappa + lr * (T - kappa)``."""
    if not 0 < state.lr_kappa <= 1:
        raise ArgumentError(f"lr_kappa must lie in (0, 1], got {state.lr_kappa}")
    return replace(state, kappa=state.kappa + state.lr_kappa * (T - state.kappa))


@dataclass
class LossSpec:
    """Which loss a run uses, bound to everything it needs besides the batch.

    Calling it with ``(probs, labels)`` gives ``(value, dvalue/dprobs)``.
    ``minority_classes`` is the positive group for MFE/MSFE; ``gmse`` holds
    the current GMSE state.
    """

    kind: str = "unweighted_ce"
    minority_classes: tuple = field(default=())
    gmse: GmseState | None = None
    empty_group: str = "raise"

    def __post_init__(self):
        self.kind = self.kind.lower()
        if self.kind not in LOSS_KINDS:
            raise SpecError(f"unknown loss kind {self.kind!r}; choose from {LOSS_KINDS}")
        self.minority_classes = tuple(int(c) for c in self.minority_classes)
        if self.kind in ("mfe", "msfe") and not self.minority_classes:
            raise SpecError(f"{self.kind} needs minority (positive) classes")
        if self.kind == "gmse" and self.gmse is None:
            self.gmse = GmseState(minority_classes=self.minority_classes)

    def __call__(self, probs, labels):
        probs = np.asarray(probs, dtype=np.float64)
        labels = _check_labels(probs, labels)
        if self.kind == "unweighted_ce":
            return unweighted_ce(probs, labels)
        if self.kind == "weighted_ce":
            return weighted_ce(probs, labels)
        targets = one_hot(labels, probs.shape[1])
        if self.kind == "mse":
            return mse_loss(probs, targets)
        if self.kind == "mfe":
            return mfe_loss(probs, targets, self.minority_classes, self.empty_group)
        if self.kind == "msfe":
            return msfe_loss(probs, targets, self.minority_classes, self.empty_group)
        return gmse_loss(probs, targets, labels, self.gmse)
