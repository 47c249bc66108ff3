"""K-means over FPC scores, silhouette tuning and donor-pool extraction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import NoDonorsError, ValidationError

MAX_LLOYD_ITER = 500


def make_rng(*key: int) -> np.random.Generator:
    """Counter-based generator keyed on a tuple of integers."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


@dataclass
class Clustering:
    k: int
    assignment: np.ndarray
    centers: np.ndarray
    wss: float
    silhouette: float | None = None
    wss_history: list[float] = field(default_factory=list, repr=False)
    restart: int = 0


@dataclass
class TuneResult:
    table: list[tuple[int, float, float | None]]  # (k, wss, silhouette)
    best_k: int
    fits: dict[int, Clustering] = field(repr=False, default_factory=dict)

    @property
    def best(self) -> Clustering:
        return self.fits[self.best_k]


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)


def _wss(points, centers, assignment) -> float:
    return float(((points - centers[assignment]) ** 2).sum())


def _lloyd(points: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray, list[float]]:
    k = len(centers)
    assignment = np.argmin(_sq_dists(points, centers), axis=1)
    history = [_wss(points, centers, assignment)]
    for _ in range(MAX_LLOYD_ITER):
        new_centers = centers.copy()
        for c in range(k):
            members = assignment == c
            if members.any():
                new_centers[c] = points[members].mean(axis=0)
        # reseed any empty cluster to the point farthest from its own center
        for c in range(k):
            if not np.any(assignment == c):
                far = int(np.argmax(((points - new_centers[assignment]) ** 2).sum(axis=1)))
                new_centers[c] = points[far]
                assignment = assignment.copy()
                assignment[far] = c
        centers = new_centers
        history.append(_wss(points, centers, assignment))
        new_assignment = np.argmin(_sq_dists(points, centers), axis=1)
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        history.append(_wss(points, centers, assignment))
    return assignment, centers, history


def kmeans(points: np.ndarray, k: int, restarts: int = 50, seed: int = 0) -> Clustering:
    """Best-of-``restarts`` Lloyd iteration with Forgy initialization.

    Restart ``r`` draws its ``k`` initial centers without replacement from
    the distinct data points using the generator keyed ``(seed, k, r)``.
    The kept run has the lowest WSS, ties going to the lowest restart index.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    distinct = np.unique(points, axis=0)
    if not 1 <= k <= len(distinct):
        raise ValidationError(f"k={k} must be between 1 and the {len(distinct)} distinct points")
    if restarts < 1:
        raise ValidationError("restarts must be >= 1")

    best = None
    for r in range(restarts):
        rng = make_rng(seed, k, r)
        init = distinct[np.sort(rng.choice(len(distinct), size=k, replace=False))]
        assignment, centers, history = _lloyd(points, init.copy())
        wss = _wss(points, centers, assignment)
        if best is None or wss < best.wss:
            best = Clustering(k, assignment, centers, wss, wss_history=history, restart=r)
    if k >= 2:
        best.silhouette = silhouette(points, best.assignment, best.centers)[1]
    return best


def silhouette(points: np.ndarray, assignment: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, float]:
    """Center-based silhouette values and their mean.

    ``a(i)`` is the distance from point ``i`` to its own center and ``b(i)``
    the distance to the nearest other center, ``s(i) = (b - a) / max(a, b)``.
    This differs from the classical pairwise-distance silhouette.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    centers = np.asarray(centers, dtype=float)
    if len(centers) < 2:
        raise ValidationError("silhouette is undefined for k=1")
    dist = np.sqrt(_sq_dists(points, centers))
    idx = np.arange(len(points))
    a = dist[idx, assignment]
    other = dist.copy()
    other[idx, assignment] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.divide(b - a, denom, out=np.zeros_like(a), where=denom > 0)
    return s, float(s.mean())


def candidate_ks(n_distinct: int, k_range: Iterable[int]) -> list[int]:
    """Values of ``k`` for which tuning is meaningful on ``n_distinct`` points.

    Keeps ``2 <= k < n_distinct`` so at least one cluster holds two points;
    when nothing survives the fallback is ``[1]``. A single-valued range is
    taken as a fixed choice and returned unchanged.
    """
    ks = sorted(set(int(k) for k in k_range))
    if len(ks) == 1:
        return ks
    ks = [k for k in ks if 2 <= k < n_distinct]
    return ks or [1]


def tune_k(points: np.ndarray, k_range: Iterable[int] = range(2, 9), restarts: int = 50, seed: int = 0) -> TuneResult:
    """Fit each candidate ``k`` and pick the one with the highest silhouette.

    Ties go to the smaller ``k``.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    ks = candidate_ks(len(np.unique(points, axis=0)), k_range)
    fits = {k: kmeans(points, k, restarts, seed) for k in ks}
    table = [(k, fits[k].wss, fits[k].silhouette) for k in ks]
    if len(ks) == 1:
        best_k = ks[0]
    else:
        best_k = max(ks, key=lambda k: (fits[k].silhouette, -k))
    return TuneResult(table, best_k, fits)


def donor_pool(clustering: Clustering, treated_index: int) -> list[int]:
    """Units sharing the treated unit's cluster, treated excluded, in order."""
    own = clustering.assignment[treated_index]
    donors = [int(i) for i in np.flatnonzero(clustering.assignment == own) if i != treated_index]
    if not donors:
        raise NoDonorsError(f"treated unit {treated_index} is alone in its cluster; no donors")
    return donors
