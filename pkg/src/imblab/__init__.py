"""Imbalanced time-series classification: losses, samplers, metrics and experiments."""
from .data import (
    FoldAssignment,
    ImbalanceSpec,
    TimeSeriesDataset,
    apply_imbalance,
    load_dataset,
    measure_imbalance,
    save_dataset,
    stratified_kfold,
    synth_two_patterns,
)
from .errors import ImblabError
from .losses import GmseState, LossSpec, compute_H, compute_T, update_kappa
from .metrics import EvalReport, evaluate
from .net import Classifier, build_classifier, forward, gradient_check
from .separability import dataset_separability
from .train import RunConfig, crossval, train_run

__version__ = "0.1.0"
