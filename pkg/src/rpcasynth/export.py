"""Plot-ready CSV and JSON writers.

Floats are written with ``repr`` so identical inputs give byte-identical
files. The only non-deterministic field anywhere is ``generated_at`` in
the JSON header.
"""

from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .panel import Panel, format_time


def _num(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return repr(x) if np.isfinite(x) else ""


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_json(path: Path, body: dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"header": {"tool": "rpcasynth", "generated_at": datetime.now(timezone.utc).isoformat()}}
    doc.update(body)
    path.write_text(json.dumps(doc, indent=2, default=_jsonable) + "\n", encoding="utf-8")
    return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if hasattr(obj, "__dataclass_fields__"):
        from dataclasses import asdict

        return asdict(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def series_rows(times, actual, counterfactual, mask=None):
    for i, (t, a, c) in enumerate(zip(times, actual, counterfactual)):
        seen = mask is None or mask[i]
        yield [format_time(t), float(a) if seen else None, float(c), float(a - c) if seen else None]


def write_series(path, times, actual, counterfactual, mask=None) -> Path:
    return write_csv(path, ["time", "actual", "counterfactual", "gap"], series_rows(times, actual, counterfactual, mask))


def write_weights(path, panel: Panel, donors: Sequence[int], beta) -> Path:
    """One row per non-treated unit; units outside the donor pool get ``-``."""
    w = dict(zip(donors, beta))
    rows = []
    for i, label in enumerate(panel.unit_labels):
        if i == panel.treated:
            continue
        rows.append([label, float(w[i]) if i in w else "-"])
    return write_csv(path, ["unit", "weight"], rows)


def write_tune(path, table) -> Path:
    return write_csv(path, ["k", "wss", "silhouette"], ([k, float(wss), None if sc is None else float(sc)] for k, wss, sc in table))


def write_clusters(path, labels, assignment, scores) -> Path:
    k = scores.shape[1]
    header = ["unit", "cluster"] + [f"score_{i + 1}" for i in range(k)]
    return write_csv(path, header, ([u, int(c)] + [float(s) for s in row] for u, c, row in zip(labels, assignment, scores)))


def write_scree(path, eigenvalues, explained) -> Path:
    total = float(np.sum(eigenvalues))
    rows = ([i + 1, float(lam), float(lam) / total, float(cum)] for i, (lam, cum) in enumerate(zip(eigenvalues, explained)))
    return write_csv(path, ["component", "eigenvalue", "explained", "cumulative"], rows)


def write_fpca_grid(path, grid, mean, eigenfunctions) -> Path:
    header = ["t", "mean"] + [f"phi_{i + 1}" for i in range(len(eigenfunctions))]
    rows = ([float(t), float(m)] + [float(p) for p in col] for t, m, col in zip(grid, mean, np.asarray(eigenfunctions).T))
    return write_csv(path, header, rows)


def write_spectrum(path, singular_values, cumulative) -> Path:
    rows = ([i + 1, float(s), float(c)] for i, (s, c) in enumerate(zip(singular_values, cumulative)))
    return write_csv(path, ["index", "singular_value", "cumulative_explained"], rows)


def write_ratios(path, report) -> Path:
    rows = []
    for unit, pre in report.per_unit_rmspe_pre.items():
        rows.append([unit, pre, report.per_unit_rmspe_post[unit], report.ratios.get(unit)])
    return write_csv(path, ["unit", "pre_rmspe", "post_rmspe", "ratio"], rows)


def write_loo(path, times, baseline, loo_series: dict[str, np.ndarray]) -> Path:
    """Long format; the full-donor fit appears with ``dropped`` empty."""
    rows = [["", format_time(t), float(v)] for t, v in zip(times, baseline)]
    for unit, series in loo_series.items():
        rows += [[unit, format_time(t), float(v)] for t, v in zip(times, series)]
    return write_csv(path, ["dropped", "time", "counterfactual"], rows)


def write_study(path, rows) -> Path:
    header = ["sigma2", "variant", "pre_rmspe", "post_rmspe", "clustering_accuracy", "k", "first_fpc_explained"]
    return write_csv(
        path,
        header,
        ([float(r.sigma2), r.variant, r.pre_rmspe, r.post_rmspe, float(r.clustering_accuracy), r.k, r.first_fpc_explained] for r in rows),
    )


def write_study_series(path, times, rows) -> Path:
    out = []
    for r in rows:
        out += [[float(r.sigma2), r.variant, format_time(t), float(a), float(e)] for t, a, e in zip(times, r.truth, r.estimate)]
    return write_csv(path, ["sigma2", "variant", "time", "truth", "estimate"], out)


def write_study_scree(path, rows) -> Path:
    out = []
    for r in rows:
        lam = np.asarray(r.eigenvalues, dtype=float)
        share = lam / lam.sum()
        out += [[float(r.sigma2), r.variant, i + 1, float(v), float(p), float(c)] for i, (v, p, c) in enumerate(zip(lam, share, np.cumsum(share)))]
    return write_csv(path, ["sigma2", "variant", "component", "eigenvalue", "explained", "cumulative"], out)


def write_study_tune(path, rows) -> Path:
    out = []
    for r in rows:
        out += [[float(r.sigma2), r.variant, k, float(wss), None if sc is None else float(sc)] for k, wss, sc in r.tune_table]
    return write_csv(path, ["sigma2", "variant", "k", "wss", "silhouette"], out)
