"""End-to-end robust PCA synthetic control.

Steps: FPCA on every unit's pre-period, K-means on the leading scores to
pick the donor pool, robust PCA of the donor matrix over the full horizon,
non-negative least-squares weights on the pre-period low-rank block, and
the counterfactual as the weighted post-period low-rank block.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np

from . import cluster, fpca, rpca
from .errors import RpcaSynthError, StageError, ValidationError
from .nnls import nnls
from .panel import Panel, require_valid


@dataclass(frozen=True)
class PipelineConfig:
    score_threshold: float = 0.95
    k_range: tuple[int, ...] = tuple(range(2, 9))
    restarts: int = 50
    seed: int = 0
    smoothing: fpca.SmoothingConfig = field(default_factory=fpca.SmoothingConfig)
    rpca_lambda: float | None = None
    rpca_mu: float | None = None
    rpca_tol: float | None = None
    rpca_max_iter: int = 1000
    missing: str = "complete"

    def snapshot(self) -> dict[str, Any]:
        d = asdict(self)
        d["k_range"] = list(self.k_range)
        return d


@dataclass
class SynthFit:
    donor_indices: list[int]
    beta: np.ndarray
    fitted_pre: np.ndarray
    counterfactual_post: np.ndarray
    pre_rmspe: float
    config_used: dict[str, Any]

    @property
    def counterfactual(self) -> np.ndarray:
        return np.concatenate([self.fitted_pre, self.counterfactual_post])

    def positive_donors(self) -> list[int]:
        return [d for d, b in zip(self.donor_indices, self.beta) if b > 0]


@dataclass
class PipelineResult:
    fit: SynthFit
    fpca: fpca.FpcaResult
    n_scores: int
    tuning: cluster.TuneResult
    clustering: cluster.Clustering
    rpca: rpca.RpcaResult
    panel: Panel


def fit_weights(y_pre: np.ndarray, l_pre: np.ndarray) -> np.ndarray:
    """Non-negative ``beta`` minimizing ``||y_pre - l_pre.T @ beta||``.

    ``l_pre`` is donors x pre-periods.
    """
    y_pre = np.asarray(y_pre, dtype=float)
    l_pre = np.atleast_2d(np.asarray(l_pre, dtype=float))
    if l_pre.shape[1] != y_pre.shape[0]:
        raise ValidationError(f"l_pre has {l_pre.shape[1]} periods, y_pre has {y_pre.shape[0]}")
    beta = nnls(l_pre.T, y_pre)
    assert np.all(beta >= 0)
    return beta


def predict_counterfactual(l_post: np.ndarray, beta: np.ndarray) -> np.ndarray:
    l_post = np.atleast_2d(np.asarray(l_post, dtype=float))
    beta = np.asarray(beta, dtype=float)
    if l_post.shape[0] != beta.shape[0]:
        raise ValidationError(f"{l_post.shape[0]} donor rows but {beta.shape[0]} weights")
    return l_post.T @ beta


def _rmspe(a, b) -> float:
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


def _rpca_config(donors: np.ndarray, mask: np.ndarray, cfg: PipelineConfig) -> rpca.RpcaConfig:
    base = rpca.default_hyperparams(donors, mask, cfg.rpca_max_iter)
    return replace(
        base,
        lam=cfg.rpca_lambda or base.lam,
        mu=cfg.rpca_mu or base.mu,
        tol=cfg.rpca_tol or base.tol,
    )


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, RpcaSynthError) and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def run_pipeline(panel: Panel, cfg: PipelineConfig = PipelineConfig()) -> PipelineResult:
    require_valid(panel)
    t0, treated = panel.t0, panel.treated
    times = panel.time_labels[:t0]
    y_pre_all = panel.values[:, :t0]
    mask_pre = panel.mask[:, :t0]

    with _Stage("fpca"):
        fp = fpca.run_fpca(times, y_pre_all, mask_pre, cfg.smoothing)
        n_scores = fpca.select_num_scores(fp.eigenvalues, cfg.score_threshold)
        points = fp.scores[:, :n_scores]

    with _Stage("cluster"):
        tuning = cluster.tune_k(points, cfg.k_range, cfg.restarts, cfg.seed)
        clustering = tuning.best
        donors = cluster.donor_pool(clustering, treated)

    with _Stage("rpca"):
        y_donors = panel.filled()[donors]
        m_donors = panel.mask[donors]
        rcfg = _rpca_config(y_donors, m_donors if cfg.missing == "complete" else None, cfg)
        dec = rpca.rpca_admm(y_donors, rcfg, m_donors, cfg.missing)

    with _Stage("fit"):
        y_treated = panel.values[treated]
        seen = panel.mask[treated, :t0]
        beta = fit_weights(y_treated[:t0][seen], dec.low_rank[:, :t0][:, seen])
        fitted_pre = dec.low_rank[:, :t0].T @ beta
        post = predict_counterfactual(dec.low_rank[:, t0:], beta)

    used = cfg.snapshot()
    used.update(
        n_scores=n_scores,
        k=clustering.k,
        bandwidth_mean=fp.bandwidth_mean,
        bandwidth_cov=fp.bandwidth_cov,
        rpca_resolved=asdict(rcfg),
    )
    fit = SynthFit(
        donor_indices=donors,
        beta=beta,
        fitted_pre=fitted_pre,
        counterfactual_post=post,
        pre_rmspe=_rmspe(y_treated[:t0][seen], fitted_pre[seen]),
        config_used=used,
    )
    return PipelineResult(fit, fp, n_scores, tuning, clustering, dec, panel)
