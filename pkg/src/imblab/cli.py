"""Command-line interface.

Exit codes: 0 success, 1 runtime / input failure, 2 usage error or invalid parameters.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .data import ImbalanceSpec, apply_imbalance, load_dataset, measure_imbalance, save_dataset
from .errors import DegenerateClassError, ImblabError, SpecError
from .manifest import load_manifest, read_config
from .net import build_classifier, save_model
from .report import render_tables, write_atomic, write_outputs
from .separability import dataset_separability
from .train import RunConfig, crossval, history_to_csv, holdout_split, train_run

log = logging.getLogger("imblab")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_imbalance(args) -> int:
    try:
        spec = ImbalanceSpec(args.form, args.rho, args.mu, args.seed)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    ds = load_dataset(args.input, znorm=False)
    try:
        out = apply_imbalance(ds, spec)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rho, mu = measure_imbalance(out)
    counts = out.class_counts()
    summary = {
        "rho_measured": rho,
        "mu_measured": mu,
        "per_class_counts": {name: int(counts[i]) for i, name in enumerate(out.label_names)},
        "spec": {"form": spec.form, "rho": spec.rho, "mu": spec.mu, "seed": spec.seed},
    }
    output = Path(args.output)
    save_dataset(out, output)
    write_atomic(output.with_name(output.stem + ".summary.json"), _dumps(summary))
    sys.stdout.write(_dumps(summary))
    return EXIT_OK


def cmd_separability(args) -> int:
    ds = load_dataset(args.input, znorm=not args.no_znorm)
    try:
        report = dataset_separability(ds)
    except DegenerateClassError as exc:
        print(f"error: class {exc.label!r} has fewer than 2 instances", file=sys.stderr)
        return EXIT_RUNTIME
    sys.stdout.write(_dumps(report.to_dict()))
    return EXIT_OK


def _run_config(args) -> RunConfig:
    data = dict(read_config(args.config)) if args.config else {}
    for item in args.set or []:
        key, _, value = item.partition("=")
        try:
            data[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            data[key.strip()] = value
    if args.method:
        data["method"] = args.method
    return RunConfig.from_mapping(data)


def cmd_train(args) -> int:
    cfg = _run_config(args)
    train = load_dataset(args.train, znorm=not args.no_znorm)
    if args.val:
        val = load_dataset(args.val, znorm=not args.no_znorm)
        if val.label_names != train.label_names:
            print("error: train and validation files use different label sets", file=sys.stderr)
            return EXIT_RUNTIME
    else:
        train, val = holdout_split(train, 0.2, cfg.seed)
    model = build_classifier((train.n_dims, train.length), train.n_classes, cfg.layers, seed=cfg.seed)
    result = train_run(train, val, model, cfg)
    out = Path(args.out)
    write_atomic(out / "history.csv", history_to_csv(result.history))
    out.mkdir(parents=True, exist_ok=True)
    save_model(result.model, out / "model.bin")
    report = result.final_eval.to_dict()
    report["best_epoch"] = result.best_epoch
    report["config"] = cfg.to_dict()
    write_atomic(out / "eval.json", _dumps(json.loads(json.dumps(report, default=float))))
    print(f"best epoch {result.best_epoch}: val F3 {result.final_eval.f_beta_macro:.4f}, "
          f"AUC {result.final_eval.auc_macro:.4f}, {result.wall_time:.2f}s")
    return EXIT_OK


def cmd_crossval(args) -> int:
    manifest = load_manifest(args.manifest)
    if args.output:
        manifest.output = Path(args.output)
    jobs = args.jobs or manifest.jobs
    results = []
    for source in manifest.datasets:
        ds = source.load()
        try:
            sep = dataset_separability(ds).overall
        except DegenerateClassError:
            sep = None
        res = crossval(ds, manifest.k, manifest.methods, manifest.seed, manifest.imbalance,
                       manifest.val_fraction, jobs, sep)
        res.extra["shape"] = list(ds.shape)
        results.append(res)
    info = {
        "seed": manifest.seed,
        "k": manifest.k,
        "imbalance": None if manifest.imbalance is None else vars(manifest.imbalance),
        "methods": [m.to_dict() for m in manifest.methods],
        "datasets": [s.name for s in manifest.datasets],
    }
    written = write_outputs(results, manifest.output, info)
    failures = [(r.dataset, o.method, o.fold, o.error) for r in results for o in r.failures]
    for ds_name, method, fold, err in failures:
        print(f"run failed: {ds_name} / {method} / fold {fold}: {err}", file=sys.stderr)
    print(f"wrote {written['csv']} and {written['json']}")
    return EXIT_RUNTIME if failures else EXIT_OK


def cmd_report(args) -> int:
    data = json.loads(Path(args.bundle).read_text(encoding="utf-8"))
    sys.stdout.write(render_tables(data, percent=not args.fraction))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="imblab", description="Imbalanced time-series classification experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("imbalance", help="derive a step/linear imbalanced copy of a Long CSV dataset")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--form", default="step", choices=["step", "linear"])
    s.add_argument("--rho", type=float, required=True)
    s.add_argument("--mu", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_imbalance)

    s = sub.add_parser("separability", help="class-separability score as JSON")
    s.add_argument("input")
    s.add_argument("--no-znorm", action="store_true", help="skip per-series z-normalization")
    s.set_defaults(func=cmd_separability)

    s = sub.add_parser("train", help="train one model and write history, weights and evaluation")
    s.add_argument("--train", required=True)
    s.add_argument("--val", help="validation Long CSV (default: stratified 20%% holdout of --train)")
    s.add_argument("--config", help="TOML run config")
    s.add_argument("--method")
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    s.add_argument("--out", required=True)
    s.add_argument("--no-znorm", action="store_true")
    s.set_defaults(func=cmd_train)

    for name in ("crossval", "run"):
        s = sub.add_parser(name, help="k-fold comparison of the methods in a manifest")
        s.add_argument("manifest")
        s.add_argument("-o", "--output", help="override the manifest output directory")
        s.add_argument("-j", "--jobs", type=int, default=0)
        s.set_defaults(func=cmd_crossval)

    s = sub.add_parser("report", help="render F3/AUC/time tables from results.json")
    s.add_argument("bundle")
    s.add_argument("--fraction", action="store_true", help="print scores as fractions, not percent")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ImblabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
