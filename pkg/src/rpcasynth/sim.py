"""Two-process simulation study with optional random missingness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cluster import make_rng
from .errors import StageError
from .evaluation import rmspe
from .panel import Panel
from .synth import PipelineConfig, run_pipeline


@dataclass(frozen=True)
class SimConfig:
    n1: int = 100
    n2: int = 100
    t_max: int = 250
    t0: int = 150
    sigma2_list: tuple[float, ...] = (1.0, 4.0, 9.0, 16.0, 25.0)
    missing_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if not 1 < self.t0 < self.t_max:
            raise ValueError("need 1 < t0 < t_max")
        if any(s <= 0 for s in self.sigma2_list):
            raise ValueError("noise variances must be positive")
        if not 0 <= self.missing_fraction < 1:
            raise ValueError("missing_fraction must be in [0, 1)")


@dataclass
class SimData:
    panel: Panel
    cohort: np.ndarray  # 1 or 2 per donor row, 0 for the treated row
    mean_f1: np.ndarray
    mean_f2: np.ndarray


@dataclass
class StudyRow:
    sigma2: float
    variant: str
    pre_rmspe: float
    post_rmspe: float
    clustering_accuracy: float
    k: int
    first_fpc_explained: float
    donors_match_cohort: bool
    estimate: np.ndarray = field(repr=False, default=None)
    truth: np.ndarray = field(repr=False, default=None)
    eigenvalues: np.ndarray = field(repr=False, default=None)
    tune_table: list = field(repr=False, default=None)
    panel: Panel = field(repr=False, default=None)


def f1(t: np.ndarray, t_max: int) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    r = np.mod(t, 10)
    return 0.3 * np.mod(t, t_max + 1) - r * np.sin(t / np.pi) + r * np.cos(t / np.pi)


def f2(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return np.log(t) + 4 * np.sin(t / np.pi) + 4 * np.cos(t / np.pi)


def time_grid(cfg: SimConfig) -> np.ndarray:
    # log(t) in the second process rules out t = 0
    return np.arange(1, cfg.t_max + 1, dtype=float)


def generate_processes(cfg: SimConfig, sigma2: float) -> SimData:
    """Noisy cohorts of both processes plus the noiseless first mean as treated.

    Rows ``0..n1-1`` are noisy ``f1``, the next ``n2`` rows noisy ``f2`` and
    the last row the noiseless ``f1`` mean. Row ``j`` draws its noise from
    the stream keyed ``(seed, j)``, scaled by ``sqrt(sigma2)``.
    """
    t = time_grid(cfg)
    m1, m2 = f1(t, cfg.t_max), f2(t)
    rows = []
    for j in range(cfg.n1 + cfg.n2):
        z = make_rng(cfg.seed, j).standard_normal(len(t))
        base = m1 if j < cfg.n1 else m2
        rows.append(base + np.sqrt(sigma2) * z)
    rows.append(m1)
    values = np.array(rows)
    labels = [f"f1_{j}" for j in range(cfg.n1)] + [f"f2_{j}" for j in range(cfg.n2)] + ["truth"]
    cohort = np.r_[np.ones(cfg.n1, int), np.full(cfg.n2, 2), 0]
    panel = Panel(values, np.ones(values.shape, bool), labels, t, treated=len(rows) - 1, t0=cfg.t0)
    return SimData(panel, cohort, m1, m2)


def drop_missing(panel: Panel, fraction: float, seed: int) -> Panel:
    """Mask exactly ``round(fraction * cells)`` uniformly chosen donor cells.

    The treated row is never touched.
    """
    if not 0 <= fraction < 1:
        raise ValueError("fraction must be in [0, 1)")
    rows = [i for i in range(panel.n_units) if i != panel.treated]
    cells = len(rows) * panel.n_periods
    n_drop = int(round(fraction * cells))
    mask = panel.mask.copy()
    if n_drop:
        pick = make_rng(seed, 0x6D61736B).choice(cells, size=n_drop, replace=False)
        r, c = np.divmod(pick, panel.n_periods)
        mask[np.asarray(rows)[r], c] = False
    return Panel(panel.values, mask, panel.unit_labels, panel.time_labels, panel.treated, panel.t0)


def clustering_accuracy(assignment: np.ndarray, cohort: np.ndarray) -> float:
    """Share of noisy units whose cluster's majority cohort is their own."""
    keep = cohort > 0
    a, c = assignment[keep], cohort[keep]
    correct = 0
    for lab in np.unique(a):
        members = c[a == lab]
        correct += np.bincount(members).max()
    return correct / len(c)


def run_cell(cfg: SimConfig, sigma2: float, variant: str, pipeline_cfg: PipelineConfig = PipelineConfig()) -> StudyRow:
    data = generate_processes(cfg, sigma2)
    panel = data.panel
    if variant == "missing":
        panel = drop_missing(panel, cfg.missing_fraction, cfg.seed)
    elif variant != "full":
        raise ValueError(f"unknown variant {variant!r}")
    try:
        res = run_pipeline(panel, pipeline_cfg)
    except StageError as exc:
        raise StageError(f"sigma2={sigma2:g}/{variant}/{exc.stage}", exc.cause) from exc
    fit = res.fit
    t0 = cfg.t0
    truth = data.mean_f1
    f1_rows = list(range(cfg.n1))
    return StudyRow(
        sigma2=sigma2,
        variant=variant,
        pre_rmspe=rmspe(truth, fit.counterfactual, slice(0, t0)),
        post_rmspe=rmspe(truth, fit.counterfactual, slice(t0, None)),
        clustering_accuracy=clustering_accuracy(res.clustering.assignment, data.cohort),
        k=res.clustering.k,
        first_fpc_explained=float(res.fpca.explained[0]),
        donors_match_cohort=fit.donor_indices == f1_rows,
        estimate=fit.counterfactual,
        truth=truth,
        eigenvalues=res.fpca.eigenvalues,
        tune_table=res.tuning.table,
        panel=panel,
    )


def run_simulation_study(
    cfg: SimConfig = SimConfig(),
    pipeline_cfg: PipelineConfig = PipelineConfig(),
    variants: tuple[str, ...] = ("full", "missing"),
    jobs: int = 1,
) -> list[StudyRow]:
    cells = [(s, v) for v in variants for s in cfg.sigma2_list]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as pool:
            futures = [pool.submit(run_cell, cfg, s, v, pipeline_cfg) for s, v in cells]
            return [f.result() for f in futures]
    return [run_cell(cfg, s, v, pipeline_cfg) for s, v in cells]
