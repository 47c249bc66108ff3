"""Functional principal component analysis of pre-intervention curves.

Curves are given on a common set of distinct, sorted sampling times with a
boolean mask for the cells actually observed; each unit may be observed on
a different subset. The mean is a pooled local linear smoother, the
covariance surface a local quadratic smoother over off-diagonal raw
products, and the eigenproblem is the trapezoid discretization of the
covariance integral operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError
from .panel import is_regular

IRREGULAR_GRID_SIZE = 100


@dataclass(frozen=True)
class SmoothingConfig:
    kernel: str = "epanechnikov"
    bandwidth_mean: float | None = None
    bandwidth_cov: float | None = None
    grid_size: int | None = None

    def __post_init__(self):
        if self.kernel not in ("epanechnikov", "gaussian"):
            raise ValidationError(f"unknown kernel {self.kernel!r}")
        for name in ("bandwidth_mean", "bandwidth_cov"):
            h = getattr(self, name)
            if h is not None and not h > 0:
                raise ValidationError(f"{name} must be positive, got {h}")
        if self.grid_size is not None and self.grid_size < 2:
            raise ValidationError(f"grid_size must be >= 2, got {self.grid_size}")


@dataclass
class FpcaResult:
    grid: np.ndarray
    mean: np.ndarray
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray  # K x G
    scores: np.ndarray  # M x K
    explained: np.ndarray
    bandwidth_mean: float = 0.0
    bandwidth_cov: float = 0.0
    covariance: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_components(self) -> int:
        return len(self.eigenvalues)


def kernel(u: np.ndarray, kind: str = "epanechnikov") -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if kind == "epanechnikov":
        return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)
    if kind == "gaussian":
        return np.exp(-0.5 * u * u) / np.sqrt(2.0 * np.pi)
    raise ValidationError(f"unknown kernel {kind!r}")


def auto_bandwidth(times: np.ndarray) -> float:
    """``1.5 * span * n**(-1/5)`` over the distinct observed times."""
    t = np.unique(np.asarray(times, dtype=float))
    if t.size < 2:
        raise ValidationError("need at least 2 distinct observed times")
    return 1.5 * (t[-1] - t[0]) * t.size ** (-0.2)


def make_grid(times: np.ndarray, grid_size: int | None = None) -> np.ndarray:
    """Observed times when regularly spaced, else 100 equispaced points."""
    t = np.asarray(times, dtype=float)
    if grid_size is None:
        if is_regular(t):
            return t.copy()
        grid_size = IRREGULAR_GRID_SIZE
    return np.linspace(t[0], t[-1], grid_size)


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    w = np.zeros_like(g)
    d = np.diff(g)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


def _observed_times(times, mask):
    seen = np.asarray(mask, dtype=bool).any(axis=0)
    return np.asarray(times, dtype=float)[seen]


def estimate_mean(
    times: np.ndarray,
    values: np.ndarray,
    mask: np.ndarray,
    points: np.ndarray,
    cfg: SmoothingConfig = SmoothingConfig(),
) -> np.ndarray:
    """Pooled local linear estimate of the mean curve at ``points``.

    Every observed ``(t_jk, y_jk)`` enters the weighted least-squares fit
    ``y ~ b0 + b1 * (t - t_jk)`` with weight ``K((t_jk - t) / h)``; the
    intercept ``b0`` is the estimate at ``t``.
    """
    times = np.asarray(times, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    if np.unique(_observed_times(times, mask)).size < 2:
        raise ValidationError("need at least 2 distinct observed time points")
    h = cfg.bandwidth_mean or auto_bandwidth(_observed_times(times, mask))

    counts = mask.sum(axis=0).astype(float)
    sums = np.where(mask, values, 0.0).sum(axis=0)
    d = (points[:, None] - times[None, :]) / h
    k = kernel(d, cfg.kernel)
    s0 = k @ counts
    s1 = (k * d) @ counts
    s2 = (k * d * d) @ counts
    r0 = k @ sums
    r1 = (k * d) @ sums

    empty = s0 <= 0
    if np.any(empty):
        raise NumericalError(
            f"bandwidth {h:g} leaves no kernel weight at t={points[np.argmax(empty)]:g}"
        )
    det = s0 * s2 - s1 * s1
    # a window holding a single distinct time cannot pin the slope
    flat = det <= 1e-12 * s0 * np.maximum(s2, 1e-300)
    safe = np.where(flat, 1.0, det)
    return np.where(flat, r0 / s0, (s2 * r0 - s1 * r1) / safe)


def smooth_covariance(
    times: np.ndarray,
    values: np.ndarray,
    mask: np.ndarray,
    mean_at_times: np.ndarray,
    grid: np.ndarray,
    cfg: SmoothingConfig = SmoothingConfig(),
) -> np.ndarray:
    """Local quadratic smoother of the off-diagonal raw covariances.

    The local model at ``(t, t')`` is
    ``b0 + b1 * (t - t_jk) + b2 * (t' - t_js)**2`` with product kernel
    weights; ``b0`` is the surface value. Only pairs ``k != s`` of the same
    unit contribute. The result is symmetrized as ``(C + C.T) / 2``.
    """
    times = np.asarray(times, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    grid = np.asarray(grid, dtype=float)
    if not np.any(mask.sum(axis=1) >= 2):
        raise ValidationError("no unit has 2 or more observations; covariance undefined")
    h = cfg.bandwidth_cov or auto_bandwidth(_observed_times(times, mask))

    m = mask.astype(float)
    resid = np.where(mask, values - mean_at_times[None, :], 0.0)
    # pair counts and summed raw products per (t_a, t_b), diagonal excluded
    n_pairs = m.T @ m
    c_pairs = resid.T @ resid
    np.fill_diagonal(n_pairs, 0.0)
    np.fill_diagonal(c_pairs, 0.0)

    d = (grid[:, None] - times[None, :]) / h
    k = kernel(d, cfg.kernel)
    kd, kd2, kd4 = k * d, k * d**2, k * d**4

    def quad(u, w, v):
        return u @ w @ v.T

    a = np.empty((len(grid), len(grid), 3, 3))
    a[..., 0, 0] = quad(k, n_pairs, k)
    a[..., 0, 1] = a[..., 1, 0] = quad(kd, n_pairs, k)
    a[..., 0, 2] = a[..., 2, 0] = quad(k, n_pairs, kd2)
    a[..., 1, 1] = quad(kd2, n_pairs, k)
    a[..., 1, 2] = a[..., 2, 1] = quad(kd, n_pairs, kd2)
    a[..., 2, 2] = quad(k, n_pairs, kd4)
    b = np.stack([quad(k, c_pairs, k), quad(kd, c_pairs, k), quad(k, c_pairs, kd2)], axis=-1)

    empty = a[..., 0, 0] <= 0
    if np.any(empty):
        i, j = np.argwhere(empty)[0]
        raise NumericalError(
            f"bandwidth {h:g} leaves no kernel weight at (t, t')=({grid[i]:g}, {grid[j]:g})"
        )
    coef = np.einsum("...ij,...j->...i", np.linalg.pinv(a, rcond=1e-12, hermitian=True), b)
    surface = coef[..., 0]
    return (surface + surface.T) / 2


def eigen_decompose(surface: np.ndarray, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of the covariance operator discretized on ``grid``.

    Solves ``W^{1/2} C W^{1/2} v = lam v`` with trapezoid weights ``W`` and
    maps back as ``phi = W^{-1/2} v`` so that ``sum(w * phi_k * phi_m)`` is
    the identity. Eigenvalues at or below ``1e-10 * lam_max`` are dropped.
    Returns ``(eigenvalues, eigenfunctions)`` with eigenfunctions as rows.
    """
    c = np.asarray(surface, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if c.shape != (len(grid), len(grid)):
        raise ValidationError(f"surface shape {c.shape} does not match grid of {len(grid)}")
    if not np.all(np.isfinite(c)):
        raise NumericalError("covariance surface has non-finite entries")
    if np.max(np.abs(c - c.T), initial=0.0) > 1e-8 * max(1.0, np.max(np.abs(c), initial=0.0)):
        raise ValidationError("covariance surface is not symmetric")
    w = trapezoid_weights(grid)
    sw = np.sqrt(w)
    op = sw[:, None] * c * sw[None, :]
    lam, vec = np.linalg.eigh((op + op.T) / 2)
    order = np.argsort(lam)[::-1]
    lam, vec = lam[order], vec[:, order]
    if lam.size == 0 or lam[0] <= 0:
        return np.zeros(0), np.zeros((0, len(grid)))
    keep = lam > 1e-10 * lam[0]
    lam, vec = lam[keep], vec[:, keep]
    phi = (vec / sw[:, None]).T
    # fix the arbitrary sign so the largest-magnitude entry is positive
    flip = phi[np.arange(len(phi)), np.argmax(np.abs(phi), axis=1)] < 0
    phi[flip] *= -1
    return lam, phi


def compute_scores(
    times: np.ndarray,
    values: np.ndarray,
    mask: np.ndarray,
    mean: np.ndarray,
    eigenfunctions: np.ndarray,
    grid: np.ndarray,
) -> np.ndarray:
    """Trapezoid-rule projections of centered curves on eigenfunctions.

    Each unit is integrated over its own observed times. When a unit misses
    the ends of the window the integral is rescaled by
    ``full span / observed span``.
    """
    times = np.asarray(times, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    phi = np.atleast_2d(np.asarray(eigenfunctions, dtype=float))
    mu_t = np.interp(times, grid, mean)
    phi_t = np.stack([np.interp(times, grid, p) for p in phi]) if len(phi) else np.zeros((0, len(times)))
    full_span = times[-1] - times[0]
    scores = np.zeros((values.shape[0], len(phi)))
    for j in range(values.shape[0]):
        obs = np.flatnonzero(mask[j])
        if obs.size < 2:
            raise ValidationError(f"unit {j} has {obs.size} observed points; cannot integrate")
        t = times[obs]
        w = trapezoid_weights(t) * (full_span / (t[-1] - t[0]))
        scores[j] = phi_t[:, obs] @ (w * (values[j, obs] - mu_t[obs]))
    return scores


def explained_ratios(eigenvalues: np.ndarray) -> np.ndarray:
    lam = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    total = lam.sum()
    if total <= 0:
        raise NumericalError("all eigenvalues are zero")
    return np.cumsum(lam) / total


def select_num_scores(eigenvalues: np.ndarray, threshold: float = 0.95) -> int:
    """Smallest K whose leading eigenvalues carry ``threshold`` of the total."""
    if len(eigenvalues) == 0:
        raise NumericalError("no eigenvalues")
    if not 0 < threshold <= 1:
        raise ValidationError(f"threshold must be in (0, 1], got {threshold}")
    ratios = explained_ratios(eigenvalues)
    return int(np.searchsorted(ratios, threshold - 1e-12) + 1)


def run_fpca(
    times: np.ndarray,
    values: np.ndarray,
    mask: np.ndarray | None = None,
    cfg: SmoothingConfig = SmoothingConfig(),
) -> FpcaResult:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if mask is None:
        mask = np.isfinite(values)
    mask = np.asarray(mask, dtype=bool)
    obs_times = _observed_times(times, mask)
    h_auto = auto_bandwidth(obs_times)
    cfg_used = SmoothingConfig(
        cfg.kernel,
        cfg.bandwidth_mean or h_auto,
        cfg.bandwidth_cov or h_auto,
        cfg.grid_size,
    )
    grid = make_grid(times, cfg.grid_size)
    mean_grid = estimate_mean(times, values, mask, grid, cfg_used)
    mean_times = estimate_mean(times, values, mask, times, cfg_used)
    surface = smooth_covariance(times, values, mask, mean_times, grid, cfg_used)
    lam, phi = eigen_decompose(surface, grid)
    if lam.size == 0:
        raise NumericalError("covariance surface has no positive eigenvalues")
    scores = compute_scores(times, values, mask, mean_grid, phi, grid)
    return FpcaResult(
        grid=grid,
        mean=mean_grid,
        eigenvalues=lam,
        eigenfunctions=phi,
        scores=scores,
        explained=explained_ratios(lam),
        bandwidth_mean=cfg_used.bandwidth_mean,
        bandwidth_cov=cfg_used.bandwidth_cov,
        covariance=surface,
    )
