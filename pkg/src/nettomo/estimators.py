"""Frequentist rate estimation from link counts.

Four routes to an intensity estimate:

* exact EM - the E-step averages route counts over the enumerated feasible
  set with Poisson weights;
* normal-approximation EM - the E-step uses the Gaussian conditional mean
  ``lam + Lam A' (A Lam A')^{-1} (y - A lam)``, which is cheap but can go
  negative (clamped by a positivity floor);
* Gaussian likelihood of the averaged link counts, maximised by projected
  gradient ascent;
* method of moments - first and second sample moments stacked into an
  overdetermined nonnegative least-squares system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import nnls

from ._estep_fast import estep_batch
from .simulate import DEFAULT_CAP

__all__ = [
    "EmConfig",
    "EstimateReport",
    "estep_exact",
    "estep_normal",
    "em_fit",
    "observed_loglik",
    "gaussian_loglik",
    "gaussian_loglik_grad",
    "gaussian_fit",
    "moment_system",
    "moment_fit",
    "default_init",
]


@dataclass(frozen=True)
class EmConfig:
    """Iteration controls shared by the fitting routines.

    ``floor`` is the elementwise positivity floor applied after every update;
    it keeps the diagonal rate matrix invertible for the next step.
    """

    max_iters: int = 500
    tol: float = 1e-6
    estep_mode: str = "exact"
    floor: float = 1e-6
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.tol < 0:
            raise ValueError("tol must be nonnegative (0 disables the delta stop)")
        if self.floor <= 0:
            raise ValueError("floor must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.estep_mode not in ("exact", "normal"):
            raise ValueError(f"unknown estep_mode {self.estep_mode!r}")


@dataclass(frozen=True)
class EstimateReport:
    """Result of a fit: the estimate plus convergence bookkeeping."""

    method: str
    lambda_hat: np.ndarray
    iterations: int
    converged: bool
    trajectory: tuple = ()
    objective: float = None
    residual: float = None
    loglik_trajectory: tuple = field(default=None, repr=False)

    def to_dict(self):
        doc = {
            "schema": 1,
            "method": self.method,
            "lambda_hat": [float(v) for v in self.lambda_hat],
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }
        if self.objective is not None:
            doc["objective"] = float(self.objective)
        if self.residual is not None:
            doc["residual"] = float(self.residual)
        return doc


def _as_samples(samples, r):
    ys = np.asarray(samples, dtype=np.int64)
    if ys.ndim == 1:
        ys = ys[None, :]
    if ys.shape[1] != r:
        raise ValueError(f"samples have {ys.shape[1]} links, matrix has {r}")
    return ys


def default_init(samples, c):
    """Uniform starting rates: mean per-period total traffic spread over routes."""
    ys = np.asarray(samples, dtype=float)
    total = ys.sum(axis=1).mean()
    return np.full(c, max(total / c, 1.0))


def estep_exact(p, y, lam, cap=DEFAULT_CAP):
    """Conditional mean of the route counts over the exact feasible set.

    Weights are Poisson masses evaluated in log space; the result satisfies
    ``A @ result == y`` up to float rounding because conditional expectation
    preserves the linear constraint.
    """
    ex, _, _, _ = estep_batch(p, np.asarray(y), lam, cap)
    return ex[0]


def observed_loglik(p, samples, lam, cap=DEFAULT_CAP):
    """Exact observed-data Poisson log-likelihood of link counts.

    Per period ``log P(Y = y | lam) = -sum(lam) + log W`` where ``W`` is the
    total Poisson weight of the feasible set; summed over periods.
    """
    lam = np.asarray(lam, dtype=float)
    ys = _as_samples(samples, p.r)
    _, log_w, _, _ = estep_batch(p, ys, lam, cap)
    return float(log_w.sum() - ys.shape[0] * lam.sum())


def estep_normal(a, y, lam):
    """Gaussian-approximation conditional mean; entries may be negative."""
    a = np.asarray(a, dtype=float)
    lam = np.asarray(lam, dtype=float)
    y = np.asarray(y, dtype=float)
    if (lam <= 0).any():
        raise ValueError("rates must be positive")
    s = (a * lam) @ a.T
    resid = y - a @ lam
    z = np.linalg.solve(s, resid.T if resid.ndim > 1 else resid)
    return lam + lam * (a.T @ z).T


def em_fit(a, samples, init=None, cfg=None, partition_cache=None):
    """EM iteration for the route rates from K periods of link counts.

    Averages the configured E-step over periods, clamps to the positivity
    floor, and stops when the sup-norm change drops below ``cfg.tol``.  With
    the exact E-step the report also carries the observed-data log-likelihood
    at each iterate (a free by-product of the feasible-set sweep).
    """
    from .topology import partition as make_partition

    cfg = cfg or EmConfig()
    a = np.asarray(a)
    ys = _as_samples(samples, a.shape[0])
    lam = default_init(ys, a.shape[1]) if init is None else np.asarray(init, dtype=float).copy()
    if (lam <= 0).any():
        raise ValueError("init rates must be positive")
    p = None
    if cfg.estep_mode == "exact":
        p = partition_cache if partition_cache is not None else make_partition(a)

    deltas = []
    logliks = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        if cfg.estep_mode == "exact":
            ex, log_w, _, _ = estep_batch(p, ys, lam, cfg.cap)
            logliks.append(float(log_w.sum() - ys.shape[0] * lam.sum()))
            new = ex.mean(axis=0)
        else:
            # the normal E-step is affine in y, so the period average equals
            # one E-step at the mean link counts
            new = estep_normal(a, ys.mean(axis=0), lam)
        new = np.maximum(new, cfg.floor)
        delta = float(np.abs(new - lam).max())
        deltas.append(delta)
        lam = new
        if delta < cfg.tol:
            converged = True
            break
    return EstimateReport(
        method=f"em-{cfg.estep_mode}",
        lambda_hat=lam,
        iterations=it,
        converged=converged,
        trajectory=tuple(deltas),
        loglik_trajectory=tuple(logliks) if logliks else None,
    )


def gaussian_loglik(lam, ybar, k_periods, a):
    """Log-likelihood of the averaged link counts under the normal model.

    ``-log|A Lam A'| - K (ybar - A lam)' (A Lam A')^{-1} (ybar - A lam)``,
    constant terms dropped.
    """
    a = np.asarray(a, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if (lam <= 0).any():
        raise ValueError("rates must be positive")
    s = (a * lam) @ a.T
    cf = cho_factor(s)
    logdet = 2.0 * np.log(np.diag(cf[0])).sum()
    resid = np.asarray(ybar, dtype=float) - a @ lam
    return float(-logdet - k_periods * resid @ cho_solve(cf, resid))


def gaussian_loglik_grad(lam, ybar, k_periods, a):
    """Analytic gradient of :func:`gaussian_loglik` in the rates."""
    a = np.asarray(a, dtype=float)
    lam = np.asarray(lam, dtype=float)
    s = (a * lam) @ a.T
    cf = cho_factor(s)
    resid = np.asarray(ybar, dtype=float) - a @ lam
    u = cho_solve(cf, resid)
    m = cho_solve(cf, a)
    quad_diag = (a * m).sum(axis=0)  # a_j' S^{-1} a_j
    w = a.T @ u
    return -quad_diag + k_periods * (2.0 * w + w * w)


def gaussian_fit(a, samples, init=None, cfg=None):
    """Maximise the normal log-likelihood by projected gradient ascent.

    Backtracking halving line search with an Armijo factor of 1e-4 and
    projection onto ``lam >= floor``; the objective is non-decreasing across
    accepted steps by construction.
    """
    cfg = cfg or EmConfig()
    a = np.asarray(a)
    ys = _as_samples(samples, a.shape[0])
    if ys.shape[0] < 2:
        raise ValueError("need at least 2 periods for a meaningful average")
    ybar = ys.mean(axis=0)
    k = ys.shape[0]
    lam = default_init(ys, a.shape[1]) if init is None else np.asarray(init, dtype=float).copy()
    lam = np.maximum(lam, cfg.floor)

    f = gaussian_loglik(lam, ybar, k, a)
    step = 1.0 / max(k, 1)
    deltas = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        grad = gaussian_loglik_grad(lam, ybar, k, a)
        accepted = False
        alpha = step
        for _ in range(60):
            cand = np.maximum(lam + alpha * grad, cfg.floor)
            move = cand - lam
            if not move.any():
                break
            f_cand = gaussian_loglik(cand, ybar, k, a)
            if f_cand >= f + 1e-4 * float(grad @ move):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        delta = float(np.abs(cand - lam).max())
        deltas.append(delta)
        lam, f = cand, f_cand
        step = alpha * 1.5
        if delta < cfg.tol:
            converged = True
            break
    return EstimateReport(
        method="gaussian",
        lambda_hat=lam,
        iterations=it,
        converged=converged,
        trajectory=tuple(deltas),
        objective=f,
    )


def moment_system(a, samples, second_moment_weight=1.0):
    """Stacked first- and second-moment equations for the rates.

    r rows of ``ybar = A lam`` followed by r(r+1)/2 rows, one per link pair
    ``i <= h``, with design ``a_i * a_h`` (elementwise) and right-hand side
    the biased (1/K) sample covariance of the pair.
    """
    a = np.asarray(a, dtype=float)
    ys = _as_samples(samples, a.shape[0]).astype(float)
    k, r = ys.shape
    if k < 2:
        raise ValueError("need at least 2 periods for sample moments")
    ybar = ys.mean(axis=0)
    cov = ys.T @ ys / k - np.outer(ybar, ybar)
    iu, ih = np.triu_indices(r)
    design = np.vstack([a, second_moment_weight * a[iu] * a[ih]])
    rhs = np.concatenate([ybar, second_moment_weight * cov[iu, ih]])
    return design, rhs


def moment_fit(a, samples, floor=1e-6, second_moment_weight=1.0):
    """Nonnegative least-squares solve of the stacked moment system."""
    design, rhs = moment_system(a, samples, second_moment_weight)
    lam, rnorm = nnls(design, rhs)
    return EstimateReport(
        method="moments",
        lambda_hat=np.maximum(lam, floor),
        iterations=1,
        converged=True,
        residual=float(rnorm),
    )
