"""Robust PCA (low-rank plus sparse) by ADMM with closed-form proximal steps.

Solves ``min ||L||_* + lam * ||S||_1`` subject to ``L + S = Y`` using the
augmented Lagrangian with multiplier term ``<Lambda, L + S - Y>``::

    L <- D_{1/mu}(Y - S - Lambda / mu)
    S <- S_{lam/mu}(Y - L - Lambda / mu)
    Lambda <- Lambda + mu * (L + S - Y)

``tol`` is an absolute stopping tolerance on ``||Y - L - S||_F``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DivergenceError, NumericalError, ValidationError


@dataclass(frozen=True)
class RpcaConfig:
    lam: float
    mu: float
    tol: float
    max_iter: int = 1000
    dual_init: str = "scaled"  # or "zero"

    def __post_init__(self):
        for name in ("lam", "mu", "tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"RPCA {name} must be positive, got {getattr(self, name)}")
        if self.max_iter < 1:
            raise ValidationError("RPCA max_iter must be >= 1")
        if self.dual_init not in ("scaled", "zero"):
            raise ValidationError(f"unknown dual_init {self.dual_init!r}")


@dataclass
class RpcaResult:
    low_rank: np.ndarray
    sparse: np.ndarray
    dual: np.ndarray
    iterations: int
    residual: float
    converged: bool
    config: RpcaConfig | None = None
    residual_history: list[float] = field(default_factory=list, repr=False)


def soft_threshold(x: np.ndarray, tau: float) -> np.ndarray:
    """Elementwise ``sign(x) * max(|x| - tau, 0)``; the prox of ``tau * ||.||_1``."""
    if tau < 0:
        raise ValidationError("tau must be non-negative")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def singular_value_threshold(x: np.ndarray, tau: float) -> np.ndarray:
    """Soft-threshold the singular values; the prox of ``tau * ||.||_*``."""
    return _svt(x, tau)[0]


def _svt(x: np.ndarray, tau: float) -> tuple[np.ndarray, int]:
    if tau < 0:
        raise ValidationError("tau must be non-negative")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NumericalError("singular value thresholding of a matrix with non-finite entries")
    try:
        u, s, vt = np.linalg.svd(x, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc
    s = np.maximum(s - tau, 0.0)
    r = int(np.count_nonzero(s))
    return (u[:, :r] * s[:r]) @ vt[:r], r


def default_hyperparams(y: np.ndarray, mask: np.ndarray | None = None, max_iter: int = 1000) -> RpcaConfig:
    """Rule-of-thumb settings for an ``n x T`` matrix.

    ``lam = 1 / sqrt(max(n, T))``, ``tol = 1e-7 * ||Y||_F`` and
    ``mu = n * T / (4 * sum |Y|)``. With a mask only observed cells count.
    """
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValidationError("empty matrix")
    if mask is None:
        mask = np.ones(y.shape, dtype=bool)
    obs = y[np.asarray(mask, dtype=bool)]
    abs_sum = np.abs(obs).sum()
    if abs_sum == 0:
        raise ValidationError("all-zero matrix: mu is undefined")
    return RpcaConfig(
        lam=1.0 / np.sqrt(max(y.shape)),
        mu=obs.size / (4.0 * abs_sum),
        tol=1e-7 * np.linalg.norm(obs),
        max_iter=max_iter,
    )


def _initial_dual(y: np.ndarray, lam: float) -> np.ndarray:
    scale = max(np.linalg.norm(y, 2), np.abs(y).max() / lam)
    # with the +<Lambda, L + S - Y> convention the optimal multiplier is -G
    # for a subgradient G of ||L||_*, hence the minus sign
    return -y / scale if scale > 0 else np.zeros_like(y)


MISSING_POLICIES = ("complete", "zero")


def rpca_admm(
    y: np.ndarray,
    cfg: RpcaConfig | None = None,
    mask: np.ndarray | None = None,
    missing: str = "complete",
) -> RpcaResult:
    """Decompose ``Y`` into low-rank ``L`` and sparse ``S``.

    Cells where ``mask`` is False are filled with zero. Under
    ``missing="complete"`` they carry no multiplier, are left out of the
    residual, and their ``S`` entry is set to ``-L`` so no data constraint
    binds there (``L`` completes them). Under ``missing="zero"`` the zeros are
    kept as observations and ``S`` has to absorb them as corruption.
    """
    if missing not in MISSING_POLICIES:
        raise ValidationError(f"unknown missing-value policy {missing!r}")
    y = np.asarray(y, dtype=float)
    observed = np.ones(y.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    y = np.where(observed, y, 0.0)
    if missing == "zero":
        observed = np.ones(y.shape, dtype=bool)
    if not np.all(np.isfinite(y)):
        raise ValidationError("input matrix has non-finite observed entries")
    if cfg is None:
        if not np.any(y):
            cfg = RpcaConfig(lam=1.0 / np.sqrt(max(y.shape)), mu=1.0, tol=1e-12)
        else:
            cfg = default_hyperparams(y, observed)

    lam, mu = cfg.lam, cfg.mu
    s = np.zeros_like(y)
    if cfg.dual_init == "scaled":
        dual = np.where(observed, _initial_dual(y, lam), 0.0)
    else:
        dual = np.zeros_like(y)
    low = np.zeros_like(y)
    history = []
    converged = False
    it = 0
    residual = np.inf
    for it in range(1, cfg.max_iter + 1):
        low, _ = _svt(y - s - dual / mu, 1.0 / mu)
        s = np.where(observed, soft_threshold(y - low - dual / mu, lam / mu), -low)
        gap = np.where(observed, low + s - y, 0.0)
        dual = dual + mu * gap
        residual = float(np.linalg.norm(gap))
        history.append(residual)
        if not (np.isfinite(residual) and np.all(np.isfinite(dual))):
            raise DivergenceError(it)
        if residual <= cfg.tol:
            converged = True
            break
    return RpcaResult(low, s, dual, it, residual, converged, cfg, history)


def scale_config(cfg: RpcaConfig, c: float) -> RpcaConfig:
    """Config under which ``rpca_admm(c * Y)`` returns ``c`` times the solution."""
    return replace(cfg, mu=cfg.mu / c, tol=cfg.tol * c)


def spectrum_report(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Singular values (descending) and cumulative share of ``sum sigma^2``."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise ValidationError("empty matrix")
    s = np.linalg.svd(y, compute_uv=False)
    energy = s**2
    total = energy.sum()
    cum = np.cumsum(energy) / total if total > 0 else np.zeros_like(s)
    return s, cum
