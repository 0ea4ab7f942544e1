import math

import numpy as np
import pytest
from scipy.optimize import nnls

from nettomo import (
    EmConfig,
    InconsistentObservationError,
    em_fit,
    enumerate_feasible,
    estep_exact,
    estep_normal,
    gaussian_fit,
    gaussian_loglik,
    gaussian_loglik_grad,
    link_counts,
    moment_fit,
    moment_system,
    observed_loglik,
    partition,
    simulate_traffic,
)


def naive_estep(p, y, lam):
    """Direct weighted average without log-space tricks: the oracle."""
    sols = enumerate_feasible(p, y)
    total = 0.0
    acc = np.zeros(p.c)
    for row in sols:
        w = 1.0
        for lam_j, x_j in zip(lam, row):
            w *= lam_j ** int(x_j) / math.factorial(int(x_j))
        total += w
        acc += w * row
    return acc / total


def test_estep_exact_identity():
    p = partition(np.eye(2, dtype=int))
    out = estep_exact(p, np.array([3, 5]), np.array([1.0, 9.0]))
    assert np.allclose(out, [3, 5])


def test_estep_exact_zero(p4):
    out = estep_exact(p4, np.zeros(7, dtype=int), np.full(12, 2.0))
    assert np.allclose(out, 0.0)


def test_estep_exact_matches_naive_oracle(p4, a4):
    y = a4 @ np.ones(12, dtype=int)
    lam = np.full(12, 1.0)
    ref = naive_estep(p4, y, lam)
    out = estep_exact(p4, y, lam)
    assert np.abs(out - ref).max() / np.abs(ref).max() < 1e-10
    # conditional expectation preserves the constraint exactly
    assert np.abs(a4 @ out - y).max() < 1e-8


def test_estep_exact_matches_naive_oracle_uneven_rates(p4, a4):
    rng = np.random.default_rng(21)
    lam = rng.uniform(0.2, 2.5, 12)
    x = rng.poisson(1.0, 12)
    y = a4 @ x
    ref = naive_estep(p4, y, lam)
    out = estep_exact(p4, y, lam)
    rel = np.abs(out - ref) / np.maximum(np.abs(ref), 1e-12)
    assert rel.max() < 1e-10


def test_estep_exact_empty_feasible_set():
    # two parallel links on the same route can never disagree
    a = np.array([[1], [1]])
    p = partition(np.array([[1, 1], [1, 0]]))  # invertible 2x2 instead
    del a
    with pytest.raises(InconsistentObservationError):
        # y = (0, 1) forces X1 + X2 = 0 and X1 = 1: impossible
        estep_exact(p, np.array([0, 1]), np.array([1.0, 1.0]))


def test_estep_normal_exact_residual_zero(a4):
    lam = np.full(12, 4.0)
    y = a4 @ lam
    out = estep_normal(a4, y, lam)
    assert np.allclose(out, lam)


def test_estep_normal_identity():
    a = np.eye(3, dtype=int)
    out = estep_normal(a, np.array([4.0, 0.0, 9.0]), np.array([2.0, 5.0, 1.0]))
    assert np.allclose(out, [4, 0, 9])


def test_estep_normal_constraint_consistency(p4, a4):
    rng = np.random.default_rng(3)
    lam = np.full(12, 5.0)
    y = a4 @ rng.poisson(5.0, 12)
    out = estep_normal(a4, y, lam)
    assert np.abs(a4 @ out - y).max() < 1e-8
    # comparison against the exact E-step is recorded, not bounded
    exact = estep_exact(p4, y, lam)
    rel_dev = np.abs(out - exact) / np.maximum(exact, 1e-9)
    assert np.isfinite(rel_dev).all()


def test_em_identity_network_one_step():
    a = np.eye(3, dtype=int)
    ys = np.array([[3, 0, 7], [5, 0, 9]])
    report = em_fit(a, ys, cfg=EmConfig(estep_mode="exact", tol=1e-9))
    assert report.converged
    assert report.iterations <= 2
    assert np.allclose(report.lambda_hat, [4.0, 1e-6, 8.0])


def test_em_exact_loglik_monotone(p4, a4):
    y = a4 @ np.ones(12, dtype=int)
    cfg = EmConfig(estep_mode="exact", max_iters=100, tol=0.0)
    report = em_fit(a4, y[None, :], cfg=cfg)
    lls = np.array(report.loglik_trajectory)
    assert len(lls) == 100
    assert (np.diff(lls) >= -1e-9).all()


def test_em_exact_loglik_matches_direct_evaluation(p4, a4):
    y = a4 @ np.ones(12, dtype=int)
    lam = np.full(12, 0.9)
    ll = observed_loglik(p4, y[None, :], lam)
    sols = enumerate_feasible(p4, y)
    w = 0.0
    for row in sols:
        term = math.exp(-lam.sum())
        for lam_j, x_j in zip(lam, row):
            term *= lam_j ** int(x_j) / math.factorial(int(x_j))
        w += term
    assert abs(ll - math.log(w)) < 1e-10


def test_em_exact_vs_normal_large_rate_agreement():
    # small chain network keeps the feasible sets tractable at large rates,
    # where the normal approximation is good
    a = np.array([[1, 1, 0], [0, 1, 1]])
    sample = simulate_traffic(a, np.full(3, 100.0), 500, seed=5)
    exact = em_fit(a, sample.y, cfg=EmConfig(estep_mode="exact", cap=2048, tol=1e-6))
    norm = em_fit(a, sample.y, cfg=EmConfig(estep_mode="normal", tol=1e-6))
    rel = np.abs(exact.lambda_hat - norm.lambda_hat) / exact.lambda_hat
    assert rel.max() < 0.10


def test_gaussian_loglik_trivial_cases(a4):
    lam = np.full(12, 3.0)
    ybar = a4 @ lam
    s = (a4 * lam) @ a4.T
    expected = -np.linalg.slogdet(s)[1]
    assert abs(gaussian_loglik(lam, ybar, 10, a4) - expected) < 1e-9
    # scalar case: A = (1), lambda = 1, ybar = 1: value 0
    assert gaussian_loglik(np.array([1.0]), np.array([1.0]), 1, np.eye(1)) == 0.0


def test_gaussian_grad_matches_finite_differences(a4):
    rng = np.random.default_rng(17)
    lam = rng.uniform(2.0, 6.0, 12)
    ybar = a4 @ rng.uniform(2.0, 6.0, 12)
    k = 37
    grad = gaussian_loglik_grad(lam, ybar, k, a4)
    eps = 1e-6
    for j in range(12):
        up = lam.copy()
        dn = lam.copy()
        up[j] += eps
        dn[j] -= eps
        fd = (gaussian_loglik(up, ybar, k, a4) - gaussian_loglik(dn, ybar, k, a4)) / (2 * eps)
        assert abs(fd - grad[j]) / max(abs(fd), 1e-8) < 1e-5


def test_gaussian_fit_identity():
    a = np.eye(3, dtype=int)
    rng = np.random.default_rng(2)
    ys = rng.poisson(8.0, (400, 3))
    report = gaussian_fit(a, ys, cfg=EmConfig(max_iters=2000, tol=1e-9))
    assert np.abs(report.lambda_hat - ys.mean(axis=0)).max() < 0.05


def test_gaussian_fit_objective_monotone(a4):
    sample = simulate_traffic(a4, np.full(12, 20.0), 100, seed=8)
    lams = []
    objs = []
    cfg = EmConfig(max_iters=200, tol=1e-8)
    report = gaussian_fit(a4, sample.y, cfg=cfg)
    # the line search guarantees ascent; re-check from the trajectory by
    # replaying: run twice with identical config and compare determinism too
    report2 = gaussian_fit(a4, sample.y, cfg=cfg)
    assert (report.lambda_hat == report2.lambda_hat).all()
    assert report.objective is not None
    del lams, objs


def test_moment_system_dimensions(a4):
    sample = simulate_traffic(a4, np.full(12, 5.0), 50, seed=4)
    design, rhs = moment_system(a4, sample.y)
    assert design.shape == (7 + 28, 12)
    assert rhs.shape == (35,)


def test_moment_system_identity_variances():
    a = np.eye(2, dtype=int)
    rng = np.random.default_rng(6)
    ys = rng.poisson((3.0, 9.0), (500, 2))
    design, rhs = moment_system(a, ys)
    ybar = ys.mean(axis=0)
    # first two rows are the means; the i == h rows carry the variances
    assert np.allclose(rhs[:2], ybar)
    biased_var = ys.var(axis=0)
    assert np.allclose(rhs[2], biased_var[0])
    assert np.allclose(rhs[4], biased_var[1])


def test_moment_exact_recovery_from_planted_moments(a4):
    lam = np.linspace(1.0, 12.0, 12)
    dummy = np.zeros((2, 7), dtype=int)
    design, _ = moment_system(a4, dummy)
    assert np.linalg.matrix_rank(design) == 12
    iu, ih = np.triu_indices(7)
    cov_exact = (a4 * lam) @ a4.T
    rhs = np.concatenate([a4 @ lam, cov_exact[iu, ih]])
    lam_hat, _ = nnls(design, rhs)
    assert np.abs(lam_hat - lam).max() < 1e-8


def test_moment_fit_zero_samples(a4):
    ys = np.zeros((5, 7), dtype=int)
    report = moment_fit(a4, ys)
    assert (report.lambda_hat == 1e-6).all()


def test_moment_fit_nonnegative(a4):
    sample = simulate_traffic(a4, np.full(12, 5.0), 300, seed=9)
    report = moment_fit(a4, sample.y)
    assert (report.lambda_hat >= 0).all()
    assert report.residual is not None


def test_fits_are_deterministic(a4):
    sample = simulate_traffic(a4, np.full(12, 3.0), 40, seed=12)
    r1 = em_fit(a4, sample.y, cfg=EmConfig(estep_mode="normal", max_iters=50))
    r2 = em_fit(a4, sample.y, cfg=EmConfig(estep_mode="normal", max_iters=50))
    assert (r1.lambda_hat == r2.lambda_hat).all()
    m1 = moment_fit(a4, sample.y)
    m2 = moment_fit(a4, sample.y)
    assert (m1.lambda_hat == m2.lambda_hat).all()
