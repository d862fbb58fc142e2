"""Experiment manifests: TOML files naming datasets, an imbalance recipe and methods.

Example::

    seed = 7
    k = 4
    output = "results"

    [imbalance]
    form = "step"
    rho = 4
    mu = 0.5

    [defaults]            # shared by every method
    epochs = 20

    [[datasets]]
    path = "data/TwoPatterns.csv"       # Long CSV, relative to this file

    [[datasets]]
    name = "tp-small"
    synthetic = "two_patterns"
    n_per_class = 50
    length = 64
    noise_sd = 0.5

    [[methods]]
    method = "weighted"

    [[methods]]
    name = "gmse-t2"
    loss = "gmse"
    gmse.variant = "T2"

The environment variable ``IMBLAB_SEED`` overrides ``seed``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .data import ImbalanceSpec, TimeSeriesDataset, load_dataset, synth_blobs, synth_two_patterns, znormalize
from .errors import FormatError, SpecError
from .train import RunConfig

__all__ = ["DatasetSource", "ExperimentManifest", "load_manifest", "parse_manifest", "read_config"]

SEED_ENV = "IMBLAB_SEED"
_METHOD_FROM_LOSS = {"unweighted_ce": "unweighted", "weighted_ce": "weighted", "mse": "unweighted",
                     "mfe": "mfe", "msfe": "msfe", "gmse": "gmse"}


@dataclass
class DatasetSource:
    """Either a Long CSV path or a synthetic generator with its parameters."""

    name: str
    path: Path | None = None
    synthetic: str | None = None
    params: dict = field(default_factory=dict)
    znorm: bool = True

    def load(self) -> TimeSeriesDataset:
        if self.path is not None:
            ds = load_dataset(self.path, znorm=self.znorm)
        elif self.synthetic == "two_patterns":
            p = {"n_per_class": 100, "length": 128, "noise_sd": 0.3, "seed": 0, **self.params}
            ds = synth_two_patterns(p["n_per_class"], p["length"], p["noise_sd"], p["seed"], self.name)
            ds = znormalize(ds) if self.znorm else ds
        elif self.synthetic == "blobs":
            p = {"n_per_class": [50, 50], "length": 16, "spread": 1.0, "distance": 3.0, "seed": 0, **self.params}
            ds = synth_blobs(p["n_per_class"], p["length"], p["spread"], p["distance"], p["seed"], self.name)
        else:
            raise SpecError(f"dataset {self.name!r}: unknown synthetic generator {self.synthetic!r}")
        return ds


@dataclass
class ExperimentManifest:
    datasets: list
    methods: list
    k: int = 4
    seed: int = 0
    imbalance: ImbalanceSpec | None = None
    output: Path = Path("results")
    val_fraction: float = 0.2
    jobs: int = 1


def _method_config(entry: dict, defaults: dict) -> RunConfig:
    merged = {**defaults, **entry}
    if "method" not in merged:
        if "loss" in merged:
            merged["method"] = _METHOD_FROM_LOSS.get(str(merged["loss"]).lower(), "unweighted")
        elif str(merged.get("sampler", "")).lower() == "bootstrap":
            merged["method"] = "bootstrap"
    return RunConfig.from_mapping(merged)


def parse_manifest(data: dict, base_dir=".", check_paths: bool = True) -> ExperimentManifest:
    """Validate a parsed manifest; dataset paths are resolved against ``base_dir``."""
    base_dir = Path(base_dir)
    data = dict(data)
    seed = int(os.environ.get(SEED_ENV, data.get("seed", 0)))
    datasets = []
    for i, entry in enumerate(data.get("datasets", [])):
        entry = dict(entry)
        znorm = bool(entry.pop("znorm", True))
        if "path" in entry:
            path = (base_dir / entry.pop("path")).resolve()
            if check_paths and not path.exists():
                raise FileNotFoundError(f"dataset file not found: {path}")
            name = entry.pop("name", path.stem)
            datasets.append(DatasetSource(name, path=path, znorm=znorm))
        elif "synthetic" in entry:
            kind = entry.pop("synthetic")
            name = entry.pop("name", f"{kind}-{i}")
            datasets.append(DatasetSource(name, synthetic=kind, params=entry, znorm=znorm))
        else:
            raise SpecError(f"dataset entry {i} needs 'path' or 'synthetic'")
    if not datasets:
        raise SpecError("manifest lists no datasets")
    names = [d.name for d in datasets]
    if len(set(names)) != len(names):
        raise SpecError("dataset names must be unique")

    defaults = data.get("defaults", {})
    methods = [_method_config(m, defaults) for m in data.get("methods", [])]
    if not methods:
        raise SpecError("manifest lists no methods")
    mnames = [m.name for m in methods]
    if len(set(mnames)) != len(mnames):
        raise SpecError(f"method names must be unique, got {mnames}")

    imb = data.get("imbalance")
    imbalance = None
    if imb:
        imbalance = ImbalanceSpec(imb.get("form", "step"), float(imb.get("rho", 4.0)),
                                  float(imb.get("mu", 0.5)), int(imb.get("seed", 0)))
    k = int(data.get("k", 4))
    if k < 1:
        raise SpecError("k must be >= 1")
    output = Path(data.get("output", "results"))
    if not output.is_absolute():
        output = base_dir / output
    return ExperimentManifest(datasets, methods, k, seed, imbalance, output,
                              float(data.get("val_fraction", 0.2)), int(data.get("jobs", 1)))


def read_config(path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None


def load_manifest(path, check_paths: bool = True) -> ExperimentManifest:
    path = Path(path)
    return parse_manifest(read_config(path), path.parent, check_paths)
