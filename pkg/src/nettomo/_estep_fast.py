"""Fused enumerate-and-average kernel for the exact E-step.

Walks the feasible set ``{X >= 0 integer : A X = Y}`` depth-first over the
free coordinates without materialising it, accumulating the Poisson-weighted
mean and total weight in streaming log-sum-exp form.  Candidate ranges are
cut at every level by capacity residuals and by interval bounds on the pivot
block (exact at the last level), so visited nodes track the true solution
count closely.

Compiled with numba when available; a pure-numpy fallback built on
:func:`nettomo.simulate.enumerate_feasible` keeps results identical.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .errors import BudgetExceededError, InconsistentObservationError

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


STATUS_OK = 0
STATUS_EMPTY = 1
STATUS_BUDGET = 2

_G_TOL = 1e-10
_INT_TOL = 1e-9


@njit(cache=True)
def _dfs_batch(ys, a_free, g, a1_inv, log_lam_free, log_lam_piv, lgam, budget):
    k_periods, r = ys.shape
    nf = a_free.shape[1]
    status = np.zeros(k_periods, dtype=np.int64)
    log_w_tot = np.full(k_periods, -np.inf)
    ex_piv = np.zeros((k_periods, r))
    ex_free = np.zeros((k_periods, nf))
    nodes_out = np.zeros(k_periods, dtype=np.int64)
    nsol_out = np.zeros(k_periods, dtype=np.int64)

    base_stack = np.zeros((nf + 1, r))
    cap_stack = np.zeros((nf + 1, r), dtype=np.int64)
    path_logw = np.zeros(nf + 1)
    cur = np.zeros(nf, dtype=np.int64)
    hi = np.zeros(nf, dtype=np.int64)
    slack = np.zeros((nf, r))
    cap0 = np.zeros(nf, dtype=np.int64)
    v_piv = np.zeros(r)
    v_free = np.zeros(nf)

    for k in range(k_periods):
        y = ys[k]
        big = 0
        for l in range(r):
            if y[l] > big:
                big = y[l]

        # root capacity per free coordinate: min of y over the route's links
        for j in range(nf):
            b = big
            for l in range(r):
                if a_free[l, j] == 1 and y[l] < b:
                    b = y[l]
            cap0[j] = b
        # how much unassigned coords beyond level j can still raise each pivot row
        for m in range(r):
            slack_m = 0.0
            for j in range(nf - 1, -1, -1):
                slack[j, m] = slack_m
                if g[m, j] < 0.0:
                    slack_m += cap0[j] * (-g[m, j])

        for m in range(r):
            acc = 0.0
            for l in range(r):
                acc += a1_inv[m, l] * y[l]
            base_stack[0, m] = acc
        for l in range(r):
            cap_stack[0, l] = y[l]
        path_logw[0] = 0.0

        big_m = -np.inf  # running max log weight
        s_tot = 0.0
        for m in range(r):
            v_piv[m] = 0.0
        for j in range(nf):
            v_free[j] = 0.0
        nodes = 0
        nsol = 0

        if nf == 0:
            ok = True
            lw = 0.0
            for m in range(r):
                bm = base_stack[0, m]
                rm = math.floor(bm + 0.5)
                if abs(bm - rm) > _INT_TOL or rm < 0:
                    ok = False
                    break
                lw += rm * log_lam_piv[m] - lgam[int(rm)]
                v_piv[m] = rm
            if ok:
                big_m = lw
                s_tot = 1.0
                nsol = 1
        else:
            lvl = 0
            lo0, hi0 = _level_bounds(
                0, base_stack, cap_stack, a_free, g, slack, cap0, r
            )
            cur[0] = lo0
            hi[0] = hi0
            while lvl >= 0:
                if cur[lvl] > hi[lvl]:
                    lvl -= 1
                    if lvl >= 0:
                        cur[lvl] += 1
                    continue
                t = cur[lvl]
                nodes += 1
                if nodes > budget:
                    status[k] = STATUS_BUDGET
                    break
                for m in range(r):
                    base_stack[lvl + 1, m] = base_stack[lvl, m] - t * g[m, lvl]
                for l in range(r):
                    cap_stack[lvl + 1, l] = cap_stack[lvl, l] - t * a_free[l, lvl]
                path_logw[lvl + 1] = (
                    path_logw[lvl] + t * log_lam_free[lvl] - lgam[t]
                )
                if lvl + 1 == nf:
                    ok = True
                    lw = path_logw[nf]
                    for m in range(r):
                        bm = base_stack[nf, m]
                        rm = math.floor(bm + 0.5)
                        if abs(bm - rm) > _INT_TOL or rm < 0:
                            ok = False
                            break
                        lw += rm * log_lam_piv[m] - lgam[int(rm)]
                    if ok:
                        nsol += 1
                        if lw > big_m:
                            if s_tot > 0.0:
                                scale = math.exp(big_m - lw)
                                s_tot *= scale
                                for m in range(r):
                                    v_piv[m] *= scale
                                for j in range(nf):
                                    v_free[j] *= scale
                            big_m = lw
                        w = math.exp(lw - big_m)
                        s_tot += w
                        for m in range(r):
                            v_piv[m] += w * math.floor(base_stack[nf, m] + 0.5)
                        for j in range(nf):
                            v_free[j] += w * cur[j]
                    cur[lvl] += 1
                else:
                    lvl += 1
                    lo_n, hi_n = _level_bounds(
                        lvl, base_stack, cap_stack, a_free, g, slack, cap0, r
                    )
                    cur[lvl] = lo_n
                    hi[lvl] = hi_n

        nodes_out[k] = nodes
        nsol_out[k] = nsol
        if status[k] == STATUS_BUDGET:
            continue
        if nsol == 0:
            status[k] = STATUS_EMPTY
            continue
        log_w_tot[k] = big_m + math.log(s_tot)
        for m in range(r):
            ex_piv[k, m] = v_piv[m] / s_tot
        for j in range(nf):
            ex_free[k, j] = v_free[j] / s_tot

    return status, log_w_tot, ex_piv, ex_free, nodes_out, nsol_out


@njit(cache=True, inline="always")
def _level_bounds(lvl, base_stack, cap_stack, a_free, g, slack, cap0, r):
    lo = 0
    hi_v = cap0[lvl]
    for l in range(r):
        if a_free[l, lvl] == 1 and cap_stack[lvl, l] < hi_v:
            hi_v = cap_stack[lvl, l]
    hi = hi_v
    for m in range(r):
        gm = g[m, lvl]
        bm = base_stack[lvl, m] + slack[lvl, m]
        if gm > _G_TOL:
            t_max = int(math.floor((bm + _INT_TOL) / gm))
            if t_max < hi:
                hi = t_max
        elif gm < -_G_TOL:
            # bm + t*|gm| >= -tol  =>  t >= (bm + tol) / gm  (gm negative)
            t_min = int(math.ceil((bm + _INT_TOL) / gm))
            if t_min > lo:
                lo = t_min
        else:
            if bm < -_INT_TOL:
                return 0, -1
    return lo, hi


def _prepare(p, lam, max_y):
    order = np.sort(p.free_cols)
    a = p.matrix
    a_free = a[:, order].astype(np.int64)
    g = p.a1_inv @ a_free.astype(float) if len(order) else np.zeros((p.r, 0))
    lam = np.asarray(lam, dtype=float)
    log_lam = np.log(np.maximum(lam, 1e-300))
    lgam = gammaln(np.arange(max_y + 2, dtype=float) + 1.0)
    return order, a_free, g, log_lam[order], log_lam[p.pivot_cols], lgam


def estep_batch(p, ys, lam, cap):
    """Conditional means E[X | Y=y, lam] and log total weights for each row of ys.

    Returns ``(ex, log_w, nodes, nsol)`` with ``ex`` in original column order.
    Raises :class:`InconsistentObservationError` when a period has an empty
    feasible set and :class:`BudgetExceededError` past ``cap ** n_free`` nodes.
    """
    ys = np.asarray(ys, dtype=np.int64)
    if ys.ndim == 1:
        ys = ys[None, :]
    if (ys < 0).any():
        raise ValueError("link counts must be nonnegative")
    order, a_free, g, llf, llp, lgam = _prepare(p, lam, int(ys.max(initial=0)))
    n_free = len(order)
    budget = min(float(cap) ** n_free, 1e18)
    status, log_w, ex_piv, ex_free, nodes, nsol = _dfs_batch(
        ys, a_free, g, p.a1_inv, llf, llp, lgam, budget
    )
    if (status == STATUS_BUDGET).any():
        k = int(np.argmax(status == STATUS_BUDGET))
        raise BudgetExceededError(
            f"exact E-step exceeded {cap}^{n_free} nodes at period {k}",
            nodes_visited=int(nodes[k]),
            partial_count=int(nsol[k]),
        )
    if (status == STATUS_EMPTY).any():
        k = int(np.argmax(status == STATUS_EMPTY))
        raise InconsistentObservationError(
            f"no nonnegative integer route counts reproduce period {k} "
            f"link counts {ys[k].tolist()}"
        )
    ex = np.empty((ys.shape[0], p.c))
    ex[:, p.pivot_cols] = ex_piv
    ex[:, order] = ex_free
    return ex, log_w, nodes, nsol
