"""Result files: per-run history CSVs, ``results.csv``, a JSON bundle and text tables."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

from .train import CrossvalResult, history_to_csv

__all__ = ["RESULT_COLUMNS", "write_atomic", "results_rows", "results_csv", "bundle", "write_outputs", "render_tables"]

RESULT_COLUMNS = ("dataset", "separability", "method", "f3_mean", "f3_sd", "auc_mean", "auc_sd", "time_mean", "time_sd")


def write_atomic(path, text: str) -> Path:
    """Write ``text`` to a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{x:.6f}"


def results_rows(results) -> list:
    rows = []
    for res in results:
        for method in res.methods:
            s = res.summary(method)
            rows.append({
                "dataset": res.dataset,
                "separability": res.separability,
                "method": method,
                **{c: s[c] for c in RESULT_COLUMNS[3:]},
            })
    return rows


def results_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for row in results_rows(results):
        w.writerow([row["dataset"], _fmt(row["separability"]), row["method"]]
                   + [_fmt(row[c]) for c in RESULT_COLUMNS[3:]])
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, float) and (math.isnan(obj) or math.isinf(obj)):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def bundle(results, manifest_info: dict | None = None) -> dict:
    out = {"manifest": manifest_info or {}, "datasets": []}
    for res in results:
        entry = {"name": res.dataset, "k": res.k, "separability": res.separability,
                 "extra": getattr(res, "extra", {}), "methods": {}}
        for method in res.methods:
            entry["methods"][method] = {
                "summary": res.summary(method),
                "folds": [
                    {"fold": o.fold, "error": o.error, "report": o.report.to_dict() if o.report else None}
                    for o in res.outcomes if o.method == method
                ],
            }
        out["datasets"].append(entry)
    return _clean(out)


def write_outputs(results, out_dir, manifest_info: dict | None = None) -> dict:
    """Write histories, ``results.csv`` and ``results.json`` under ``out_dir``."""
    out_dir = Path(out_dir)
    written = {}
    for res in results:
        for o in res.outcomes:
            p = out_dir / "histories" / res.dataset / f"{o.method}_fold{o.fold}.csv"
            write_atomic(p, history_to_csv(o.history))
    written["csv"] = write_atomic(out_dir / "results.csv", results_csv(results))
    data = bundle(results, manifest_info)
    written["json"] = write_atomic(out_dir / "results.json", json.dumps(data, indent=2, sort_keys=True) + "\n")
    return written


def render_tables(data: dict, percent: bool = True) -> str:
    """Markdown tables (F3, AUC, training time) from a ``results.json`` bundle.

    Rows are datasets and columns methods; cells read ``mean ± sd``.
    """
    methods = []
    for ds in data["datasets"]:
        for m in ds["methods"]:
            if m not in methods:
                methods.append(m)
    blocks = []
    for key, title, scale in (("f3", "F3", 100 if percent else 1), ("auc", "AUC", 100 if percent else 1),
                              ("time", "Training time (s)", 1)):
        lines = [f"### {title}", "",
                 "| Dataset | Separability | " + " | ".join(methods) + " |",
                 "|---|---|" + "---|" * len(methods)]
        for ds in data["datasets"]:
            cells = []
            for m in methods:
                s = ds["methods"].get(m, {}).get("summary", {})
                mean, sd = s.get(f"{key}_mean"), s.get(f"{key}_sd")
                cells.append("n/a" if mean is None else f"{mean * scale:.2f} ± {(sd or 0) * scale:.2f}")
            sep = ds.get("separability")
            lines.append(f"| {ds['name']} | {'n/a' if sep is None else f'{sep:.4f}'} | " + " | ".join(cells) + " |")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"
