"""Lawson-Hanson active-set solver for non-negative least squares."""

from __future__ import annotations

import numpy as np

from .errors import NumericalError, ValidationError

KKT_RTOL = 1e-8


def kkt_scale(a: np.ndarray, b: np.ndarray) -> float:
    """``||A^T b||_inf`` (or 1 when that is zero); the unit for KKT tolerances."""
    s = float(np.max(np.abs(a.T @ b), initial=0.0))
    return s if s > 0 else 1.0


def kkt_residuals(a: np.ndarray, b: np.ndarray, x: np.ndarray) -> tuple[float, float]:
    """Return ``(stationarity, dual_feasibility)`` violations, unscaled.

    Stationarity is ``max |grad_j|`` over ``x_j > 0``; dual feasibility is
    ``max(-grad_j, 0)`` over ``x_j == 0``, with ``grad = A^T (A x - b)``.
    """
    grad = a.T @ (a @ x - b)
    pos = x > 0
    stat = float(np.max(np.abs(grad[pos]), initial=0.0))
    feas = float(np.max(-grad[~pos], initial=0.0))
    return stat, feas


def _lstsq(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.lstsq(a, b, rcond=None)[0]


def nnls(a: np.ndarray, b: np.ndarray, tol: float | None = None, max_iter: int | None = None) -> np.ndarray:
    """Solve ``min ||A x - b||_2`` subject to ``x >= 0``.

    Parameters
    ----------
    a : (m, n) array
    b : (m,) array
    tol : float, optional
        Dual-feasibility tolerance; defaults to ``1e-8 * ||A^T b||_inf``.
    max_iter : int, optional
        Bound on outer iterations, default ``3 * n + 30``.

    Returns
    -------
    x : (n,) array with exact zeros on the active set.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.shape != (a.shape[0],):
        raise ValidationError(f"shape mismatch: A {a.shape}, b {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValidationError("non-finite input to nnls")
    m, n = a.shape
    if tol is None:
        tol = KKT_RTOL * kkt_scale(a, b)
    if max_iter is None:
        max_iter = 3 * n + 30

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    blocked = np.zeros(n, dtype=bool)
    w = a.T @ b
    for _ in range(max_iter):
        candidates = ~passive & ~blocked & (w > tol)
        if not candidates.any():
            break
        j = int(np.argmax(np.where(candidates, w, -np.inf)))
        passive[j] = True
        first = True
        while True:
            z = np.zeros(n)
            z[passive] = _lstsq(a[:, passive], b)
            if np.all(z[passive] > 0):
                x = z
                blocked[:] = False
                break
            if first and z[j] <= 0:
                # rank-deficient direction: entering j cannot move the fit
                passive[j] = False
                blocked[j] = True
                break
            first = False
            bad = passive & (z <= 0)
            ratios = np.where(bad, x / np.where(bad, x - z, 1.0), np.inf)
            k = int(np.argmin(ratios))
            x = x + ratios[k] * (z - x)
            x[k] = 0.0
            passive &= x > 0
            x[~passive] = 0.0
        w = a.T @ (b - a @ x)
    else:
        raise NumericalError("nnls did not reach KKT conditions within the iteration limit")
    return x
