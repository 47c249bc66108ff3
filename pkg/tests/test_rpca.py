import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import low_rank_plus_sparse
from oracles import prox_l1_numeric, prox_nuclear_numeric, random_prox_cases
from rpcasynth.errors import NumericalError, ValidationError
from rpcasynth.rpca import (
    RpcaConfig,
    default_hyperparams,
    rpca_admm,
    scale_config,
    singular_value_threshold,
    soft_threshold,
    spectrum_report,
)


@pytest.mark.parametrize(
    "x, tau, expect",
    [(3.0, 1.0, 2.0), (-3.0, 1.0, -2.0), (0.5, 1.0, 0.0), (-1.0, 1.0, 0.0), (2.0, 0.0, 2.0)],
)
def test_soft_threshold_cases(x, tau, expect):
    assert soft_threshold(np.array([x]), tau)[0] == expect


def test_svt_diagonal():
    np.testing.assert_allclose(singular_value_threshold(np.diag([5.0, 1.0]), 2.0), np.diag([3.0, 0.0]), atol=1e-14)


def test_svt_zero_threshold_reconstructs():
    x = np.random.default_rng(0).standard_normal((4, 6))
    np.testing.assert_allclose(singular_value_threshold(x, 0.0), x, atol=1e-12)


def test_negative_threshold_rejected():
    with pytest.raises(ValidationError):
        soft_threshold(np.ones(2), -1)
    with pytest.raises(ValidationError):
        singular_value_threshold(np.eye(2), -1)


def test_svt_non_finite():
    with pytest.raises(NumericalError):
        singular_value_threshold(np.array([[np.nan, 1.0]]), 1.0)


def test_prox_match_numeric_minimizers():
    for x, tau in random_prox_cases(25, seed=11):
        np.testing.assert_allclose(soft_threshold(x, tau), prox_l1_numeric(x, tau), atol=1e-6)
        np.testing.assert_allclose(singular_value_threshold(x, tau), prox_nuclear_numeric(x, tau), atol=1e-6)


def test_svt_matches_conic_solver():
    cp = pytest.importorskip("cvxpy")
    for x, tau in random_prox_cases(8, seed=5):
        z = cp.Variable(x.shape)
        cp.Problem(cp.Minimize(0.5 * cp.sum_squares(z - x) + tau * cp.normNuc(z))).solve(
            solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12
        )
        np.testing.assert_allclose(singular_value_threshold(x, tau), z.value, atol=1e-6)


finite = st.floats(-100, 100, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(arrays(float, (3, 4), elements=finite), arrays(float, (3, 4), elements=finite), st.floats(0, 50))
def test_prox_non_expansive(x, y, tau):
    for prox in (soft_threshold, singular_value_threshold):
        d = np.linalg.norm(prox(x, tau) - prox(y, tau))
        assert d <= np.linalg.norm(x - y) * (1 + 1e-9) + 1e-9


@settings(max_examples=60, deadline=None)
@given(arrays(float, (4, 3), elements=finite), st.floats(0, 50))
def test_svt_shrinks_nuclear_norm(x, tau):
    s = np.linalg.svd(x, compute_uv=False)
    t = np.linalg.svd(singular_value_threshold(x, tau), compute_uv=False)
    np.testing.assert_allclose(t, np.maximum(s - tau, 0), atol=1e-9 * max(1, s.max()))


def test_default_hyperparams_examples():
    assert default_hyperparams(np.ones((11, 44))).lam == pytest.approx(1 / np.sqrt(44))
    assert default_hyperparams(np.ones((2, 2))).mu == pytest.approx(0.25)
    y = np.zeros((4, 4))
    y[0, 0] = 1e7
    assert default_hyperparams(y).tol == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        default_hyperparams(np.zeros((3, 3)))


def test_zero_matrix_one_iteration():
    res = rpca_admm(np.zeros((5, 6)))
    assert res.converged and res.iterations == 1
    assert not res.low_rank.any() and not res.sparse.any()


def test_rank_one_input_has_no_sparse_part():
    rng = np.random.default_rng(2)
    y = np.outer(rng.uniform(1, 2, 30), rng.uniform(1, 2, 40))
    res = rpca_admm(y)
    assert res.converged
    assert np.linalg.norm(res.sparse) < 1e-5 * np.linalg.norm(y)
    np.testing.assert_allclose(res.low_rank, y, rtol=1e-5)


def test_exact_recovery_structure():
    low, sparse = low_rank_plus_sparse(0)
    res = rpca_admm(low + sparse)
    assert res.converged and res.iterations < 1000
    assert np.linalg.norm(res.low_rank - low) / np.linalg.norm(low) < 1e-4
    s = np.linalg.svd(res.low_rank, compute_uv=False)
    assert np.sum(s > 1e-6 * s[0]) == 2
    support = np.abs(res.sparse) > 1e-3
    assert np.array_equal(support, sparse != 0)


def test_objective_certificate():
    low, sparse = low_rank_plus_sparse(1, n=20, rank=1, density=0.05)
    y = low + sparse
    res = rpca_admm(y)
    lam = res.config.lam

    def obj(l_):
        return np.linalg.svd(l_, compute_uv=False).sum() + lam * np.abs(y - l_).sum()

    best = obj(res.low_rank)
    rng = np.random.default_rng(0)
    for i in range(200):
        step = 10.0 ** rng.uniform(-4, 0)
        assert obj(res.low_rank + step * rng.standard_normal(y.shape)) >= best - 1e-6 * best


@pytest.mark.parametrize("c", [1e-3, 0.5, 7.0, 1e4])
def test_scale_equivariance(c):
    low, sparse = low_rank_plus_sparse(3, n=20, rank=1)
    y = low + sparse
    base = default_hyperparams(y)
    a = rpca_admm(y, base)
    b = rpca_admm(c * y, scale_config(base, c))
    assert b.iterations == a.iterations
    np.testing.assert_allclose(b.low_rank, c * a.low_rank, rtol=1e-6, atol=1e-9 * c * np.abs(y).max())


def test_missing_cells_completed_not_fitted():
    low, _ = low_rank_plus_sparse(4, n=30, rank=1, density=0)
    mask = np.random.default_rng(0).random(low.shape) > 0.2
    res = rpca_admm(np.where(mask, low, 0.0), mask=mask)
    assert res.converged
    # the low-rank part fills masked cells near the truth instead of zero
    assert np.linalg.norm((res.low_rank - low)[~mask]) / np.linalg.norm(low[~mask]) < 1e-3
    np.testing.assert_array_equal(res.sparse[~mask], -res.low_rank[~mask])


def test_zero_policy_treats_zeros_as_data():
    low, _ = low_rank_plus_sparse(4, n=30, rank=1, density=0)
    mask = np.ones(low.shape, bool)
    mask[0, :3] = False
    res = rpca_admm(low, mask=mask, missing="zero")
    assert res.converged
    np.testing.assert_allclose((res.low_rank + res.sparse)[0, :3], 0.0, atol=1e-5)


def test_config_validation():
    with pytest.raises(ValidationError):
        RpcaConfig(lam=0, mu=1, tol=1)
    with pytest.raises(ValidationError):
        rpca_admm(np.ones((2, 2)), missing="drop")


def test_nonconvergence_is_reported():
    low, sparse = low_rank_plus_sparse(0)
    res = rpca_admm(low + sparse, RpcaConfig(lam=0.02, mu=1e-4, tol=1e-12, max_iter=3))
    assert not res.converged and res.iterations == 3


def test_spectrum_report():
    s, cum = spectrum_report(np.diag([3.0, 4.0]))
    np.testing.assert_allclose(s, [4, 3])
    np.testing.assert_allclose(cum, [0.64, 1.0])
