"""Posterior simulation of (X, Lambda) given link counts.

Two-block Gibbs sweep: conjugate Gamma draws for the rates given the route
counts, then each free route count in turn from its constrained discrete
conditional (the pivot counts follow deterministically from the link
counts).  Every retained state satisfies ``A X = Y`` exactly.

The discrete conditional has bounded support, so it is sampled by direct
enumeration of the candidate values; a random-walk Metropolis fallback is
available for large-count regimes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import InconsistentObservationError, InfeasibleStateError
from .rng import make_rng
from .simulate import INTEGRALITY_TOL
from .topology import assemble, partition as make_partition, solve_x1

__all__ = [
    "GammaPrior",
    "ChainConfig",
    "ChainState",
    "PosteriorSummary",
    "sample_lambda",
    "support_bounds",
    "sample_x2_coordinate",
    "initialize_state",
    "run_chain",
    "effective_sample_size",
    "save_draws_csv",
]

_G_TOL = 1e-10


@dataclass(frozen=True)
class GammaPrior:
    """Independent Gamma(shape, rate) priors on the route rates."""

    shape: float = 1.0
    rate: float = 0.01

    def __post_init__(self):
        if np.any(np.asarray(self.shape) <= 0) or np.any(np.asarray(self.rate) <= 0):
            raise ValueError("gamma prior parameters must be positive")

    def mean(self, c):
        return np.broadcast_to(
            np.asarray(self.shape, dtype=float) / np.asarray(self.rate, dtype=float), (c,)
        ).copy()


@dataclass(frozen=True)
class ChainConfig:
    """Gibbs run controls."""

    n_samples: int = 1000
    burn_in: int = 500
    thin: int = 1
    seed: int = 0
    prior: GammaPrior = GammaPrior()
    mh_fallback: bool = False
    mh_width: int = 3
    random_scan: bool = False

    def __post_init__(self):
        if self.n_samples < 1 or self.thin < 1 or self.burn_in < 0:
            raise ValueError("need n_samples >= 1, thin >= 1, burn_in >= 0")


@dataclass(frozen=True)
class ChainState:
    """One point of the chain: route counts with A x = y, and positive rates."""

    x: np.ndarray
    lam: np.ndarray


@dataclass(frozen=True)
class PosteriorSummary:
    """Per-coordinate posterior summaries plus sampler diagnostics."""

    lambda_mean: np.ndarray
    lambda_std: np.ndarray
    lambda_quantiles: np.ndarray  # rows: 5%, 50%, 95%
    x_mean: np.ndarray
    x_std: np.ndarray
    x_quantiles: np.ndarray
    ess_lambda: np.ndarray
    acceptance_rate: float
    n_draws: int
    seed: int

    def to_dict(self):
        return {
            "schema": 1,
            "n_draws": int(self.n_draws),
            "seed": int(self.seed),
            "acceptance_rate": float(self.acceptance_rate),
            "lambda_mean": [float(v) for v in self.lambda_mean],
            "lambda_std": [float(v) for v in self.lambda_std],
            "lambda_q05": [float(v) for v in self.lambda_quantiles[0]],
            "lambda_q50": [float(v) for v in self.lambda_quantiles[1]],
            "lambda_q95": [float(v) for v in self.lambda_quantiles[2]],
            "x_mean": [float(v) for v in self.x_mean],
            "x_std": [float(v) for v in self.x_std],
            "x_q05": [float(v) for v in self.x_quantiles[0]],
            "x_q50": [float(v) for v in self.x_quantiles[1]],
            "x_q95": [float(v) for v in self.x_quantiles[2]],
            "ess_lambda": [float(v) for v in self.ess_lambda],
        }


def sample_lambda(x, prior, rng, periods=1):
    """Conjugate rate draw given route counts.

    With one observation vector per route the posterior for route ``a`` is
    Gamma(shape + x_a, rate + 1); for ``periods`` aggregated periods pass the
    summed counts and the rate update becomes ``rate + periods``.
    """
    x = np.asarray(x)
    shape = np.asarray(prior.shape, dtype=float) + x
    rate = np.asarray(prior.rate, dtype=float) + periods
    draw = rng.gamma(shape, 1.0 / rate)
    return np.maximum(draw, 1e-300)


def _affine_parts(p, g_mat, y, x2, i):
    """base, slope of X1 as a function of candidate values t at free slot i:
    X1(t) = base - t * g."""
    x2z = np.asarray(x2, dtype=float).copy()
    x2z[i] = 0.0
    rhs = y - p.a2 @ x2z if x2z.size else np.asarray(y, dtype=float)
    base = p.a1_inv @ rhs
    return base, g_mat[:, i]


def support_bounds(i, x2, y, p, g_mat=None):
    """Integer interval [lo, hi] of values at free slot ``i`` keeping X1 >= 0.

    The pivot block is affine in the candidate value, so each of the r rows
    contributes one half-line constraint; intersected with ``t >= 0``.  An
    empty support is signalled by ``lo > hi``.
    """
    if g_mat is None:
        g_mat = p.a1_inv @ p.a2.astype(float)
    y = np.asarray(y, dtype=float)
    base, g = _affine_parts(p, g_mat, y, x2, i)
    lo, hi = 0, np.inf
    for m in range(p.r):
        gm = g[m]
        bm = base[m]
        if gm > _G_TOL:
            hi = min(hi, math.floor((bm + INTEGRALITY_TOL) / gm))
        elif gm < -_G_TOL:
            lo = max(lo, math.ceil((bm + INTEGRALITY_TOL) / gm))
        elif bm < -INTEGRALITY_TOL:
            return 0, -1
    if not np.isfinite(hi):
        # every route crosses some link, so X1 nonnegativity always caps t;
        # guard anyway with the capacity of the route's links
        links = np.flatnonzero(p.matrix[:, p.free_cols[i]])
        hi = int(y[links].min())
    return int(lo), int(hi)


def sample_x2_coordinate(i, x2, y, p, lam, rng, g_mat=None, lgam=None):
    """Draw a new value for free slot ``i`` from its exact conditional.

    Enumerates the support, scores each candidate by its own Poisson term
    plus the r induced pivot terms (pivot counts recomputed per candidate),
    and samples from the normalised discrete distribution in log space.
    """
    if g_mat is None:
        g_mat = p.a1_inv @ p.a2.astype(float)
    y = np.asarray(y, dtype=float)
    lam = np.asarray(lam, dtype=float)
    lo, hi = support_bounds(i, x2, y, p, g_mat)
    if lo > hi:
        raise InfeasibleStateError(
            f"empty support for free slot {i}; chain state is corrupted"
        )
    t = np.arange(lo, hi + 1)
    base, g = _affine_parts(p, g_mat, y, x2, i)
    x1_cand = base[:, None] - g[:, None] * t[None, :]
    x1_round = np.rint(x1_cand)
    ok = (np.abs(x1_cand - x1_round) <= INTEGRALITY_TOL).all(axis=0)
    ok &= (x1_round >= -0.5).all(axis=0)
    if not ok.any():
        raise InfeasibleStateError(
            f"no integral pivot completion for free slot {i}"
        )
    log_lam_piv = np.log(lam[p.pivot_cols])
    lam_i = lam[p.free_cols[i]]
    if lgam is not None:
        lg_t = lgam[t]
        lg_x1 = lgam[x1_round.astype(np.int64).clip(0, len(lgam) - 1)]
    else:
        lg_t = gammaln(t + 1.0)
        lg_x1 = gammaln(x1_round.clip(0) + 1.0)
    logw = t * math.log(lam_i) - lg_t + (x1_round * log_lam_piv[:, None] - lg_x1).sum(axis=0)
    logw[~ok] = -np.inf
    logw -= logw.max()
    w = np.exp(logw)
    cdf = np.cumsum(w)
    u = rng.random() * cdf[-1]
    return int(t[np.searchsorted(cdf, u, side="right").clip(max=len(t) - 1)])


def _mh_x2_coordinate(i, x2, y, p, lam, rng, g_mat, width):
    """Random-walk Metropolis step on free slot i; returns (value, accepted)."""
    cur = int(x2[i])
    prop = cur + int(rng.integers(-width, width + 1))
    if prop == cur:
        return cur, False
    lo, hi = support_bounds(i, x2, y, p, g_mat)
    if not lo <= prop <= hi:
        return cur, False
    base, g = _affine_parts(p, g_mat, np.asarray(y, dtype=float), x2, i)

    def logw(t):
        x1 = base - g * t
        x1r = np.rint(x1)
        if (np.abs(x1 - x1r) > INTEGRALITY_TOL).any() or (x1r < -0.5).any():
            return -np.inf
        lam_piv = lam[p.pivot_cols]
        return float(
            t * math.log(lam[p.free_cols[i]])
            - gammaln(t + 1.0)
            + (x1r * np.log(lam_piv) - gammaln(x1r + 1.0)).sum()
        )

    ratio = logw(prop) - logw(cur)
    if math.log(rng.random()) <= ratio:
        return prop, True
    return cur, False


def initialize_state(p, y, rng, prior=None, max_nodes=500_000):
    """A feasible starting state: A x = y exactly, rates at the prior mean.

    Free slots start at zero; if the implied pivot block is not already a
    nonnegative integer vector, the slots are assigned one at a time, each
    drawn uniformly inside its current feasible interval (computed with
    look-ahead slack for the still-unassigned slots), backtracking through
    the remaining candidates when a slot dead-ends.
    """
    prior = prior or GammaPrior()
    y = np.asarray(y, dtype=np.int64)
    if (y < 0).any():
        raise ValueError("link counts must be nonnegative")
    a = p.matrix
    n_free = p.c - p.r
    x2 = np.zeros(n_free, dtype=np.int64)

    def finish(x2_vals):
        x1 = solve_x1(p, y.astype(float), x2_vals.astype(float))
        x1r = np.rint(x1)
        if (np.abs(x1 - x1r) <= INTEGRALITY_TOL).all() and (x1r >= -0.5).all():
            x = assemble(p, x1r.astype(np.int64), x2_vals)
            if (a @ x == y).all() and (x >= 0).all():
                return ChainState(x=x, lam=prior.mean(p.c))
        return None

    state = finish(x2)
    if state is not None:
        return state
    if n_free == 0:
        raise InconsistentObservationError(
            f"link counts {y.tolist()} admit no route counts"
        )

    # assign slots in ascending original-column order with slack-aware bounds
    slots = np.argsort(p.free_cols)
    g_cols = p.a1_inv @ p.a2.astype(float)
    cap0 = np.array(
        [y[np.flatnonzero(a[:, p.free_cols[s]])].min() for s in range(n_free)]
    )
    slack = np.zeros((n_free, p.r))
    run = np.zeros(p.r)
    for pos in range(n_free - 1, -1, -1):
        slack[pos] = run
        run = run + cap0[slots[pos]] * np.maximum(-g_cols[:, slots[pos]], 0.0)

    base0 = p.a1_inv @ y.astype(float)
    bases = [base0]
    resids = [y.copy()]
    candidates = []
    nodes = 0
    pos = 0
    while 0 <= pos < n_free:
        if len(candidates) == pos:
            s = slots[pos]
            links = np.flatnonzero(a[:, p.free_cols[s]])
            hi = int(resids[pos][links].min())
            lo = 0
            feasible = True
            for m in range(p.r):
                gm = g_cols[m, s]
                bm = bases[pos][m] + slack[pos][m]
                if gm > _G_TOL:
                    hi = min(hi, math.floor((bm + INTEGRALITY_TOL) / gm))
                elif gm < -_G_TOL:
                    lo = max(lo, math.ceil((bm + INTEGRALITY_TOL) / gm))
                elif bm < -INTEGRALITY_TOL:
                    feasible = False
                    break
            if not feasible or lo > hi:
                candidates.append([])
            else:
                vals = list(range(lo, hi + 1))
                start = int(rng.integers(0, len(vals)))
                candidates.append(vals[start:] + vals[:start])
        if not candidates[pos]:
            candidates.pop()
            bases.pop()
            resids.pop()
            pos -= 1
            continue
        t = candidates[pos].pop(0)
        nodes += 1
        if nodes > max_nodes:
            break
        s = slots[pos]
        x2[s] = t
        bases.append(bases[pos] - t * g_cols[:, s])
        resids.append(resids[pos] - t * a[:, p.free_cols[s]])
        pos += 1
        if pos == n_free:
            state = finish(x2)
            if state is not None:
                return state
            bases.pop()
            resids.pop()
            pos -= 1
    raise InconsistentObservationError(
        f"no nonnegative integer route counts reproduce link counts {y.tolist()}"
    )


def run_chain(a, y, cfg=None, partition_cache=None, collect_x=True):
    """Run the Gibbs sampler; returns (PosteriorSummary, lambda draws, x draws).

    ``y`` may be a single link-count vector or a (K, r) matrix of periods.
    With several periods each period keeps its own route-count vector and the
    rates are shared: the conjugate update aggregates counts over periods.
    Retained x draws are the per-period average when K > 1.
    """
    cfg = cfg or ChainConfig()
    a = np.asarray(a)
    p = partition_cache if partition_cache is not None else make_partition(a)
    ys = np.asarray(y, dtype=np.int64)
    single = ys.ndim == 1
    if single:
        ys = ys[None, :]
    if ys.shape[1] != p.r:
        raise ValueError(f"y has {ys.shape[1]} links, matrix has {p.r}")
    k_periods = ys.shape[0]
    rng = make_rng(cfg.seed)
    g_mat = p.a1_inv @ p.a2.astype(float)
    lgam = gammaln(np.arange(int(ys.max(initial=0)) + 2, dtype=float) + 1.0)
    n_free = p.c - p.r

    states = [initialize_state(p, ys[k], rng, cfg.prior) for k in range(k_periods)]
    x_mat = np.stack([s.x for s in states])  # (K, c)
    x2_mat = x_mat[:, p.free_cols].copy()
    lam = states[0].lam

    n_kept = cfg.n_samples
    total_sweeps = cfg.burn_in + n_kept * cfg.thin
    lam_draws = np.empty((n_kept, p.c))
    x_draws = np.empty((n_kept, p.c)) if collect_x else None
    kept = 0
    mh_proposals = 0
    mh_accepts = 0

    for sweep in range(total_sweeps):
        lam = sample_lambda(x_mat.sum(axis=0), cfg.prior, rng, periods=k_periods)
        if n_free:
            order = (
                rng.permutation(n_free) if cfg.random_scan else range(n_free)
            )
            for k in range(k_periods):
                yk = ys[k].astype(float)
                for i in order:
                    if cfg.mh_fallback:
                        val, acc = _mh_x2_coordinate(
                            i, x2_mat[k], yk, p, lam, rng, g_mat, cfg.mh_width
                        )
                        mh_proposals += 1
                        mh_accepts += int(acc)
                    else:
                        val = sample_x2_coordinate(
                            i, x2_mat[k], yk, p, lam, rng, g_mat, lgam
                        )
                    x2_mat[k, i] = val
                x1 = np.rint(solve_x1(p, yk, x2_mat[k].astype(float))).astype(np.int64)
                x_mat[k] = assemble(p, x1, x2_mat[k])
                if (p.matrix @ x_mat[k] != ys[k]).any() or (x_mat[k] < 0).any():
                    raise InfeasibleStateError(
                        f"sweep {sweep}: state violates A x = y at period {k}"
                    )
        if sweep >= cfg.burn_in and (sweep - cfg.burn_in) % cfg.thin == 0 and kept < n_kept:
            lam_draws[kept] = lam
            if collect_x:
                x_draws[kept] = x_mat[0] if single else x_mat.mean(axis=0)
            kept += 1

    q = (0.05, 0.50, 0.95)
    x_for_summary = x_draws if collect_x else np.zeros((1, p.c))
    summary = PosteriorSummary(
        lambda_mean=lam_draws.mean(axis=0),
        lambda_std=lam_draws.std(axis=0),
        lambda_quantiles=np.quantile(lam_draws, q, axis=0),
        x_mean=x_for_summary.mean(axis=0),
        x_std=x_for_summary.std(axis=0),
        x_quantiles=np.quantile(x_for_summary, q, axis=0),
        ess_lambda=np.array([effective_sample_size(lam_draws[:, j]) for j in range(p.c)]),
        acceptance_rate=(mh_accepts / mh_proposals) if mh_proposals else 1.0,
        n_draws=n_kept,
        seed=cfg.seed,
    )
    return summary, lam_draws, x_draws


def effective_sample_size(chain):
    """ESS by Geyer's initial positive sequence estimator."""
    chain = np.asarray(chain, dtype=float)
    n = len(chain)
    if n < 4:
        return float(n)
    centered = chain - chain.mean()
    var0 = centered @ centered / n
    if var0 <= 0:
        return float(n)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(centered, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n].real / n
    rho = acov / acov[0]
    # sum consecutive pairs while they stay positive
    s = 0.0
    for t in range(1, n - 1, 2):
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        s += pair
    ess = n / (1.0 + 2.0 * s)
    return float(min(max(ess, 1.0), n))


def save_draws_csv(path, lam_draws, x_draws=None):
    """Stream draws as ``draw,coord_kind,index,value`` rows."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["draw", "coord_kind", "index", "value"])
        for d, row in enumerate(np.asarray(lam_draws)):
            for j, v in enumerate(row):
                w.writerow([d, "lambda", j, repr(float(v))])
        if x_draws is not None:
            for d, row in enumerate(np.asarray(x_draws)):
                for j, v in enumerate(row):
                    w.writerow([d, "x", j, repr(float(v))])
