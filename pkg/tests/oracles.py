"""Independent reference solvers used as test oracles.

None of these share code with the package: each minimizes the defining
objective directly with a generic optimizer or enumerates the answer.
"""

from itertools import combinations

import numpy as np
from scipy.optimize import minimize


def prox_l1_numeric(x, tau):
    """argmin_z 0.5 ||z - x||^2 + tau * ||z||_1 via the split z = p - q, p, q >= 0."""
    x = np.asarray(x, float)
    n = x.size

    def f(v):
        p, q = v[:n], v[n:]
        r = p - q - x.ravel()
        return 0.5 * r @ r + tau * v.sum(), np.r_[r + tau, -r + tau]

    v0 = np.r_[np.maximum(x.ravel(), 0), np.maximum(-x.ravel(), 0)]
    res = minimize(f, v0, jac=True, method="L-BFGS-B", bounds=[(0, None)] * (2 * n),
                   options={"ftol": 0, "gtol": 1e-13, "maxiter": 10_000})
    return (res.x[:n] - res.x[n:]).reshape(x.shape)


def prox_nuclear_numeric(x, tau, seed=0):
    """argmin_z 0.5 ||z - x||_F^2 + tau * ||z||_* using ||z||_* = min 0.5 (|A|^2 + |B|^2) over z = A B^T.

    With full-width factors this smooth problem has no spurious local minima.
    """
    x = np.asarray(x, float)
    m, n = x.shape
    r = min(m, n)
    rng = np.random.default_rng(seed)
    v0 = 0.1 * rng.standard_normal((m + n) * r)

    def f(v):
        a, b = v[: m * r].reshape(m, r), v[m * r :].reshape(n, r)
        e = a @ b.T - x
        val = 0.5 * (e**2).sum() + 0.5 * tau * ((a**2).sum() + (b**2).sum())
        return val, np.r_[(e @ b + tau * a).ravel(), (e.T @ a + tau * b).ravel()]

    res = minimize(f, v0, jac=True, method="L-BFGS-B",
                   options={"ftol": 0, "gtol": 1e-14, "maxiter": 50_000, "maxcor": 30})
    a, b = res.x[: m * r].reshape(m, r), res.x[m * r :].reshape(n, r)
    return a @ b.T


def nnls_enumerate(a, b):
    """Exact NNLS by trying every support and keeping the best feasible fit."""
    a = np.asarray(a, float)
    n = a.shape[1]
    best, best_x = 0.5 * b @ b, np.zeros(n)
    for size in range(1, n + 1):
        for support in combinations(range(n), size):
            cols = list(support)
            z, *_ = np.linalg.lstsq(a[:, cols], b, rcond=None)
            if np.any(z < 0):
                continue
            x = np.zeros(n)
            x[cols] = z
            val = 0.5 * np.sum((a @ x - b) ** 2)
            if val < best - 1e-14 * max(1.0, best):
                best, best_x = val, x
    return best_x


def random_prox_cases(n_cases=25, seed=0):
    """Matrices of shape up to 4x4 with thresholds spanning their spectrum."""
    rng = np.random.default_rng(seed)
    for i in range(n_cases):
        m, n = rng.integers(1, 5, size=2)
        x = rng.standard_normal((m, n)) * rng.uniform(0.5, 5)
        s = np.linalg.svd(x, compute_uv=False)
        tau = float(rng.uniform(0, 1.2) * s.max())
        yield x, tau
