"""Placebo-in-time, placebo-in-space and leave-one-out protocols."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import RpcaSynthError, ValidationError
from .panel import Panel, require_valid
from .synth import PipelineConfig, SynthFit, run_pipeline

log = logging.getLogger(__name__)


def rmspe(actual, predicted, window: slice | None = None) -> float:
    """Root mean squared gap between two series over ``window``."""
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape:
        raise ValidationError(f"series lengths differ: {a.shape} vs {p.shape}")
    if window is not None:
        a, p = a[window], p[window]
    if a.size == 0:
        raise ValidationError("empty RMSPE window")
    return float(np.sqrt(np.mean((a - p) ** 2)))


@dataclass
class PlaceboTimeResult:
    fit: SynthFit
    fake_t0: int
    t0: int
    counterfactual: np.ndarray  # periods fake_t0 .. t0-1 (0-based)
    actual: np.ndarray
    train_rmspe: float
    placebo_rmspe: float


@dataclass
class EvalReport:
    per_unit_rmspe_pre: dict[str, float] = field(default_factory=dict)
    per_unit_rmspe_post: dict[str, float] = field(default_factory=dict)
    ratios: dict[str, float] = field(default_factory=dict)
    placebo_series: dict[str, np.ndarray] = field(default_factory=dict)
    loo_series: dict[str, np.ndarray] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    treated: str | None = None
    runs: int = 0

    def treated_is_max(self) -> bool:
        return bool(self.ratios) and max(self.ratios, key=self.ratios.get) == self.treated


def _actual(panel: Panel, unit: int) -> np.ndarray:
    return panel.values[unit]


def _record_masked(report: EvalReport, label: str, actual, counterfactual, mask, t0):
    # missing cells of the actual series are left out of both windows
    a = np.where(mask, actual, np.nan)
    pre_keep = mask[:t0]
    post_keep = mask[t0:]
    pre = rmspe(a[:t0][pre_keep], counterfactual[:t0][pre_keep])
    post = rmspe(a[t0:][post_keep], counterfactual[t0:][post_keep])
    report.per_unit_rmspe_pre[label] = pre
    report.per_unit_rmspe_post[label] = post
    if pre > 0:
        report.ratios[label] = post / pre
    report.placebo_series[label] = np.asarray(counterfactual)


def placebo_in_time(panel: Panel, fake_t0: int, cfg: PipelineConfig = PipelineConfig()) -> PlaceboTimeResult:
    """Refit as if the intervention happened after period ``fake_t0``.

    Only data up to the real intervention is used; the counterfactual covers
    periods ``fake_t0 .. t0 - 1`` (0-based), ending at the real intervention.
    """
    require_valid(panel)
    if not 2 <= fake_t0 < panel.t0:
        raise ValidationError(f"fake t0 must satisfy 2 <= fake_t0 < t0={panel.t0}, got {fake_t0}")
    shifted = panel.truncate(panel.t0).with_design(panel.treated, fake_t0)
    result = run_pipeline(shifted, cfg)
    fit = result.fit
    actual = panel.values[panel.treated]
    return PlaceboTimeResult(
        fit=fit,
        fake_t0=fake_t0,
        t0=panel.t0,
        counterfactual=fit.counterfactual_post,
        actual=actual[fake_t0 : panel.t0],
        train_rmspe=fit.pre_rmspe,
        placebo_rmspe=rmspe(actual[fake_t0 : panel.t0], fit.counterfactual_post),
    )


def _seeded(cfg: PipelineConfig, offset: int) -> PipelineConfig:
    return replace(cfg, seed=cfg.seed + offset)


def _placebo_job(panel: Panel, unit: int, cfg: PipelineConfig):
    """Pipeline with ``unit`` treated and the real treated unit removed."""
    keep = [i for i in range(panel.n_units) if i != panel.treated]
    sub = panel.subset_units(keep, treated=keep.index(unit))
    return run_pipeline(sub, _seeded(cfg, unit)).fit


def _run_jobs(fn, args_list, jobs: int):
    """Run ``fn(*args)`` for each entry; returns results or exceptions."""
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as pool:
            futures = [pool.submit(_safe_call, fn, args) for args in args_list]
            return [f.result() for f in futures]
    return [_safe_call(fn, args) for args in args_list]


def _safe_call(fn, args):
    try:
        return fn(*args)
    except RpcaSynthError as exc:
        return exc


def placebo_in_space(
    panel: Panel,
    cfg: PipelineConfig = PipelineConfig(),
    fit: SynthFit | None = None,
    jobs: int = 1,
) -> EvalReport:
    """Reassign treatment to each donor of the real fit and compare ratios.

    Every placebo is a fresh pipeline run (re-tuned clustering, own donor
    pool) on the panel without the real treated unit, seeded with
    ``seed + unit index``. Failed placebo runs are recorded in ``errors``.
    """
    require_valid(panel)
    if fit is None:
        fit = run_pipeline(panel, cfg).fit
    donors = fit.donor_indices
    if len(donors) < 2:
        raise ValidationError("placebo-in-space needs at least 2 donors")
    t0 = panel.t0
    report = EvalReport(treated=panel.unit_labels[panel.treated], runs=1)
    treated = panel.treated
    _record_masked(report, report.treated, _actual(panel, treated), fit.counterfactual, panel.mask[treated], t0)

    results = _run_jobs(_placebo_job, [(panel, u, cfg) for u in donors], jobs)
    for u, res in zip(donors, results):
        label = panel.unit_labels[u]
        report.runs += 1
        if isinstance(res, Exception):
            log.warning("placebo for %s failed: %s", label, res)
            report.errors[label] = str(res)
            continue
        _record_masked(report, label, _actual(panel, u), res.counterfactual, panel.mask[u], t0)
    return report


def _loo_job(panel: Panel, drop: int, cfg: PipelineConfig):
    keep = [i for i in range(panel.n_units) if i != drop]
    sub = panel.subset_units(keep, treated=keep.index(panel.treated))
    return run_pipeline(sub, _seeded(cfg, drop)).fit


def leave_one_out(
    panel: Panel,
    fit: SynthFit,
    cfg: PipelineConfig = PipelineConfig(),
    jobs: int = 1,
) -> EvalReport:
    """Refit after removing each positive-weight donor in turn."""
    require_valid(panel)
    positive = fit.positive_donors()
    if len(positive) < 2:
        raise ValidationError(f"leave-one-out needs >= 2 positive-weight donors, fit has {len(positive)}")
    report = EvalReport(treated=panel.unit_labels[panel.treated])
    results = _run_jobs(_loo_job, [(panel, d, cfg) for d in positive], jobs)
    for d, res in zip(positive, results):
        label = panel.unit_labels[d]
        report.runs += 1
        if isinstance(res, Exception):
            report.errors[label] = str(res)
            continue
        report.loo_series[label] = res.counterfactual
    return report
