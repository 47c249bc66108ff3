"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 64 usage error.
Options may also come from a flat ``key=value`` file given with
``--config``; command-line flags win over the file.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import export
from .errors import NumericalError, RpcaSynthError, StageError, ValidationError
from .fpca import SmoothingConfig, run_fpca
from .panel import Panel, is_regular, load_panel
from .rpca import spectrum_report
from .synth import PipelineConfig, run_pipeline

log = logging.getLogger("rpcasynth")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2, 64

DEFAULTS: dict[str, Any] = {
    "layout": "wide",
    "threshold": 0.95,
    "k_range": "2..8",
    "restarts": 50,
    "seed": 0,
    "kernel": "epanechnikov",
    "out": "out",
    "jobs": 1,
    "max_iter": 1000,
    "missing": "complete",
    "n1": 100,
    "n2": 100,
    "t_max": 250,
    "sim_t0": 150,
    "sigma2": "1,4,9,16,25",
    "missing_fraction": 0.3,
    "variant": "both",
}

TYPES = {
    "threshold": float,
    "restarts": int,
    "seed": int,
    "jobs": int,
    "max_iter": int,
    "lam": float,
    "mu": float,
    "tol": float,
    "bandwidth": float,
    "grid_size": int,
    "n1": int,
    "n2": int,
    "t_max": int,
    "sim_t0": int,
    "missing_fraction": float,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _panel_args(p: argparse.ArgumentParser, needs_treated: bool = True) -> None:
    p.add_argument("--input", help="panel CSV")
    p.add_argument("--layout", choices=["wide", "long"])
    if needs_treated:
        p.add_argument("--treated", help="label of the treated unit")
    p.add_argument("--t0", help="time label of the last pre-intervention period")


def _pipeline_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", type=float, help="FPC variance share to retain (default 0.95)")
    p.add_argument("--k-range", dest="k_range", help="cluster counts to try, e.g. 2..8 or 3")
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--kernel", choices=["epanechnikov", "gaussian"])
    p.add_argument("--bandwidth", type=float, help="smoothing bandwidth in time units (default: automatic)")
    p.add_argument("--grid-size", dest="grid_size", type=int)
    p.add_argument("--lambda", dest="lam", type=float, help="RPCA sparsity weight")
    p.add_argument("--mu", type=float, help="RPCA penalty parameter")
    p.add_argument("--tol", type=float, help="RPCA absolute residual tolerance")
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--missing", choices=["complete", "zero"], help="RPCA treatment of missing cells")
    p.add_argument("--jobs", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rpcasynth", description="Robust PCA synthetic control")
    parser.add_argument("--config", help="key=value options file")
    parser.add_argument("--out", help="output directory (default ./out)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("fit", help="estimate the counterfactual of the treated unit")
    _panel_args(p)
    _pipeline_args(p)

    p = sub.add_parser("placebo-time", help="refit with an earlier fictitious intervention")
    _panel_args(p)
    _pipeline_args(p)
    p.add_argument("--fake-t0", dest="fake_t0", help="time label of the fictitious last pre-period")

    p = sub.add_parser("placebo-space", help="reassign treatment to each donor")
    _panel_args(p)
    _pipeline_args(p)

    p = sub.add_parser("loo", help="leave out each positive-weight donor")
    _panel_args(p)
    _pipeline_args(p)

    p = sub.add_parser("simulate", help="run the two-process simulation study")
    _pipeline_args(p)
    p.add_argument("--sigma2", help="comma-separated noise variances")
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--t-max", dest="t_max", type=int)
    p.add_argument("--sim-t0", dest="sim_t0", type=int)
    p.add_argument("--missing-fraction", dest="missing_fraction", type=float)
    p.add_argument("--variant", choices=["full", "missing", "both"])
    p.add_argument("--write-panels", dest="write_panels", action="store_true", default=None,
                   help="also write each generated panel as panel_<variant>_<sigma2>.csv")

    p = sub.add_parser("fpca-report", help="FPCA of every unit's pre-period")
    _panel_args(p, needs_treated=False)
    _pipeline_args(p)

    p = sub.add_parser("spectrum", help="singular-value spectrum of the donor matrix")
    _panel_args(p)
    _pipeline_args(p)
    return parser


def read_config(path: str | Path) -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment, dashes in keys map to underscores."""
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve_options(args: argparse.Namespace) -> dict[str, Any]:
    opts = dict(DEFAULTS)
    if args.config:
        for key, value in read_config(args.config).items():
            opts[key] = TYPES.get(key, str)(value)
    for key, value in vars(args).items():
        if value is not None:
            opts[key] = value
    return opts


def parse_k_range(text: str) -> tuple[int, ...]:
    text = str(text)
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return tuple(range(int(lo), int(hi) + 1))
        return tuple(int(k) for k in text.split(","))
    except ValueError:
        raise ValidationError(f"bad k range {text!r}") from None


def pipeline_config(opts: dict[str, Any]) -> PipelineConfig:
    h = opts.get("bandwidth")
    return PipelineConfig(
        score_threshold=float(opts["threshold"]),
        k_range=parse_k_range(opts["k_range"]),
        restarts=int(opts["restarts"]),
        seed=int(opts["seed"]),
        smoothing=SmoothingConfig(opts["kernel"], h, h, opts.get("grid_size")),
        rpca_lambda=opts.get("lam"),
        rpca_mu=opts.get("mu"),
        rpca_tol=opts.get("tol"),
        rpca_max_iter=int(opts["max_iter"]),
        missing=opts["missing"],
    )


def _require(opts, *names):
    missing = [n for n in names if opts.get(n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"{opts['command']}: missing required option(s) {flags}")


def _load(opts, with_treated: bool = True) -> Panel:
    _require(opts, "input", "t0", *(["treated"] if with_treated else []))
    panel = load_panel(opts["input"], opts["layout"])
    if not is_regular(panel.time_labels):
        log.warning("time labels are irregularly spaced; FPCA will use a %d-point grid", 100)
    t0 = panel.time_index(float(opts["t0"])) + 1
    if with_treated:
        return panel.with_design(opts["treated"], t0)
    return panel.with_design(0, t0)


def _weights_summary(panel: Panel, fit) -> dict[str, float]:
    return {panel.unit_labels[d]: float(b) for d, b in zip(fit.donor_indices, fit.beta)}


def _series_json(times, values) -> dict[str, float]:
    return {export.format_time(t): float(v) for t, v in zip(times, values)}


def _print_fit(panel: Panel, result) -> None:
    fit = result.fit
    print(f"treated: {panel.unit_labels[panel.treated]}  t0: {export.format_time(panel.time_labels[panel.t0 - 1])}")
    print(f"FPC scores kept: {result.n_scores} (first explains {result.fpca.explained[0]:.4f})")
    print(f"selected k: {result.clustering.k}  donors: {len(fit.donor_indices)}")
    print("weights:")
    for label, w in sorted(_weights_summary(panel, fit).items(), key=lambda kv: -kv[1]):
        if w > 0:
            print(f"  {label:<24s} {w:.4f}")
    actual = panel.values[panel.treated]
    post = np.sqrt(np.nanmean((actual[panel.t0:] - fit.counterfactual_post) ** 2))
    print(f"pre-RMSPE: {fit.pre_rmspe:.4f}  post-RMSPE: {post:.4f}")


def _write_fit_outputs(out: Path, panel: Panel, result, cfg: PipelineConfig) -> None:
    fit = result.fit
    treated = panel.treated
    export.write_series(out / "series.csv", panel.time_labels, panel.values[treated], fit.counterfactual, panel.mask[treated])
    export.write_weights(out / "weights.csv", panel, fit.donor_indices, fit.beta)
    export.write_tune(out / "tune.csv", result.tuning.table)
    export.write_clusters(out / "clusters.csv", panel.unit_labels, result.clustering.assignment, result.fpca.scores[:, : result.n_scores])
    export.write_scree(out / "scree.csv", result.fpca.eigenvalues, result.fpca.explained)
    export.write_json(
        out / "summary.json",
        {
            "command": "fit",
            "treated": panel.unit_labels[treated],
            "t0": export.format_time(panel.time_labels[panel.t0 - 1]),
            "n_scores": result.n_scores,
            "k": result.clustering.k,
            "donors": [panel.unit_labels[d] for d in fit.donor_indices],
            "weights": _weights_summary(panel, fit),
            "pre_rmspe": fit.pre_rmspe,
            "rpca": {"iterations": result.rpca.iterations, "converged": result.rpca.converged, "residual": result.rpca.residual},
            "counterfactual": _series_json(panel.time_labels, fit.counterfactual),
            "config": fit.config_used,
        },
    )


def cmd_fit(opts, out: Path) -> None:
    panel = _load(opts)
    cfg = pipeline_config(opts)
    result = run_pipeline(panel, cfg)
    _write_fit_outputs(out, panel, result, cfg)
    _print_fit(panel, result)


def cmd_placebo_time(opts, out: Path) -> None:
    from .evaluation import placebo_in_time

    _require(opts, "fake_t0")
    panel = _load(opts)
    fake = panel.time_index(float(opts["fake_t0"])) + 1
    res = placebo_in_time(panel, fake, pipeline_config(opts))
    times = panel.time_labels[: panel.t0]
    actual = panel.values[panel.treated, : panel.t0]
    export.write_series(out / "series.csv", times, actual, res.fit.counterfactual, panel.mask[panel.treated, : panel.t0])
    export.write_json(
        out / "summary.json",
        {
            "command": "placebo-time",
            "fake_t0": export.format_time(panel.time_labels[fake - 1]),
            "weights": _weights_summary(panel, res.fit),
            "train_rmspe": res.train_rmspe,
            "placebo_rmspe": res.placebo_rmspe,
            "counterfactual": _series_json(times, res.fit.counterfactual),
        },
    )
    print(f"placebo intervention after {export.format_time(panel.time_labels[fake - 1])}")
    print(f"training RMSPE: {res.train_rmspe:.4f}  placebo-window RMSPE: {res.placebo_rmspe:.4f}")


def cmd_placebo_space(opts, out: Path) -> None:
    from .evaluation import placebo_in_space

    panel = _load(opts)
    report = placebo_in_space(panel, pipeline_config(opts), jobs=int(opts["jobs"]))
    export.write_ratios(out / "ratios.csv", report)
    rows = []
    for unit, series in report.placebo_series.items():
        u = panel.unit_index(unit)
        rows += [[unit, export.format_time(t), float(a) if m else None, float(c)] for t, a, c, m in zip(panel.time_labels, panel.values[u], series, panel.mask[u])]
    export.write_csv(out / "placebo_series.csv", ["unit", "time", "actual", "counterfactual"], rows)
    export.write_json(
        out / "summary.json",
        {
            "command": "placebo-space",
            "treated": report.treated,
            "ratios": report.ratios,
            "treated_is_max": report.treated_is_max(),
            "errors": report.errors,
        },
    )
    print(f"{'unit':<24s} {'pre':>10s} {'post':>10s} {'ratio':>8s}")
    for unit, pre in sorted(report.per_unit_rmspe_pre.items(), key=lambda kv: -report.ratios.get(kv[0], 0)):
        ratio = report.ratios.get(unit, float("nan"))
        print(f"{unit:<24s} {pre:10.4f} {report.per_unit_rmspe_post[unit]:10.4f} {ratio:8.3f}")
    for unit, err in report.errors.items():
        print(f"{unit}: failed ({err})")


def cmd_loo(opts, out: Path) -> None:
    from .evaluation import leave_one_out

    panel = _load(opts)
    cfg = pipeline_config(opts)
    fit = run_pipeline(panel, cfg).fit
    report = leave_one_out(panel, fit, cfg, jobs=int(opts["jobs"]))
    export.write_loo(out / "loo.csv", panel.time_labels, fit.counterfactual, report.loo_series)
    export.write_json(out / "summary.json", {"command": "loo", "dropped": list(report.loo_series), "errors": report.errors})
    print(f"leave-one-out refits: {len(report.loo_series)}")
    for unit, err in report.errors.items():
        print(f"{unit}: failed ({err})")


def cmd_simulate(opts, out: Path) -> None:
    from .sim import SimConfig, run_simulation_study, time_grid

    try:
        sigma2 = tuple(float(s) for s in str(opts["sigma2"]).split(","))
    except ValueError:
        raise ValidationError(f"bad --sigma2 {opts['sigma2']!r}") from None
    try:
        sim_cfg = SimConfig(
            n1=int(opts["n1"]),
            n2=int(opts["n2"]),
            t_max=int(opts["t_max"]),
            t0=int(opts["sim_t0"]),
            sigma2_list=sigma2,
            missing_fraction=float(opts["missing_fraction"]),
            seed=int(opts["seed"]),
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    variants = ("full", "missing") if opts["variant"] == "both" else (opts["variant"],)
    rows = run_simulation_study(sim_cfg, pipeline_config(opts), variants, jobs=int(opts["jobs"]))
    export.write_study(out / "study.csv", rows)
    export.write_study_series(out / "study_series.csv", time_grid(sim_cfg), rows)
    export.write_study_scree(out / "study_scree.csv", rows)
    export.write_study_tune(out / "study_tune.csv", rows)
    if opts.get("write_panels"):
        from .panel import write_wide

        for r in rows:
            write_wide(r.panel, out / f"panel_{r.variant}_{r.sigma2:g}.csv")
    export.write_json(
        out / "summary.json",
        {
            "command": "simulate",
            "rows": [
                {k: getattr(r, k) for k in ("sigma2", "variant", "pre_rmspe", "post_rmspe", "clustering_accuracy", "k", "first_fpc_explained")}
                for r in rows
            ],
        },
    )
    print(f"{'sigma2':>7s} {'variant':<8s} {'pre':>8s} {'post':>8s} {'acc':>5s} {'k':>2s}")
    for r in rows:
        print(f"{r.sigma2:7g} {r.variant:<8s} {r.pre_rmspe:8.4f} {r.post_rmspe:8.4f} {r.clustering_accuracy:5.2f} {r.k:2d}")


def cmd_fpca_report(opts, out: Path) -> None:
    panel = _load(opts, with_treated=False)
    cfg = pipeline_config(opts)
    t0 = panel.t0
    res = run_fpca(panel.time_labels[:t0], panel.values[:, :t0], panel.mask[:, :t0], cfg.smoothing)
    export.write_scree(out / "scree.csv", res.eigenvalues, res.explained)
    export.write_fpca_grid(out / "fpca_grid.csv", res.grid, res.mean, res.eigenfunctions)
    export.write_clusters(out / "scores.csv", panel.unit_labels, np.zeros(panel.n_units, int), res.scores)
    export.write_json(
        out / "summary.json",
        {
            "command": "fpca-report",
            "eigenvalues": res.eigenvalues,
            "explained": res.explained,
            "bandwidth_mean": res.bandwidth_mean,
            "bandwidth_cov": res.bandwidth_cov,
        },
    )
    for i, (lam, cum) in enumerate(zip(res.eigenvalues[:10], res.explained[:10]), start=1):
        print(f"FPC {i:2d}: eigenvalue {lam:.6g}  cumulative {cum:.4f}")


def cmd_spectrum(opts, out: Path) -> None:
    panel = _load(opts)
    cfg = pipeline_config(opts)
    result = run_pipeline(panel, cfg)
    donors = result.fit.donor_indices
    s, cum = spectrum_report(panel.filled()[donors])
    export.write_spectrum(out / "spectrum.csv", s, cum)
    export.write_json(out / "summary.json", {"command": "spectrum", "donors": [panel.unit_labels[d] for d in donors], "singular_values": s, "cumulative": cum})
    for i, (sv, c) in enumerate(zip(s[:10], cum[:10]), start=1):
        print(f"sigma_{i}: {sv:.6g}  cumulative {c:.4f}")


COMMANDS = {
    "fit": cmd_fit,
    "placebo-time": cmd_placebo_time,
    "placebo-space": cmd_placebo_space,
    "loo": cmd_loo,
    "simulate": cmd_simulate,
    "fpca-report": cmd_fpca_report,
    "spectrum": cmd_spectrum,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "rpcasynth: error: a subcommand is required")
        opts = resolve_options(args)
        logging.basicConfig(level=logging.INFO if opts.get("verbose") else logging.WARNING, format="%(levelname)s: %(message)s")
        out = Path(opts["out"])
        COMMANDS[args.command](opts, out)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if isinstance(exc.cause, NumericalError) else EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, RpcaSynthError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
