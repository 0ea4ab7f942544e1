"""Ground-truth traffic generation and exact feasible-set enumeration.

Per-route packet counts are independent Poisson draws per measurement period;
link counts follow by aggregation through the routing matrix.  The module
also provides the exact enumeration of ``{X >= 0 integer : A X = Y}`` used by
the exact E-step and by oracle tests.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceededError
from .rng import make_rng, poisson

__all__ = [
    "TrafficSample",
    "sample_sd_traffic",
    "link_counts",
    "simulate_traffic",
    "enumerate_feasible",
    "feasible_count_bounds",
    "save_traffic_csv",
    "load_traffic_csv",
]

INTEGRALITY_TOL = 1e-9

DEFAULT_CAP = 64


@dataclass(frozen=True)
class TrafficSample:
    """Simulated traffic: hidden route counts ``x`` (K x c), observed link
    counts ``y`` (K x r), and the seed that produced them."""

    x: np.ndarray
    y: np.ndarray
    seed: int

    @property
    def k_periods(self):
        return self.y.shape[0]


def sample_sd_traffic(rates, k_periods, seed):
    """K independent Poisson count vectors, one row per measurement period.

    Draws are generated route by route (column-major), so adding routes does
    not perturb the streams of earlier ones.
    """
    rates = np.asarray(rates, dtype=float)
    if (rates <= 0).any():
        raise ValueError("all rates must be positive")
    if k_periods < 1:
        raise ValueError(f"k_periods must be >= 1, got {k_periods}")
    rng = make_rng(seed)
    x = np.empty((k_periods, len(rates)), dtype=np.int64)
    for j, lam in enumerate(rates):
        x[:, j] = poisson(rng, lam, k_periods)
    return x


def link_counts(a, x):
    """Aggregate route counts into link counts: ``y = A x`` per period."""
    a = np.asarray(a, dtype=np.int64)
    x = np.asarray(x, dtype=np.int64)
    if x.ndim == 1:
        if x.shape[0] != a.shape[1]:
            raise ValueError(f"x has {x.shape[0]} routes, matrix has {a.shape[1]}")
        return a @ x
    if x.shape[1] != a.shape[1]:
        raise ValueError(f"x has {x.shape[1]} routes, matrix has {a.shape[1]}")
    return x @ a.T


def simulate_traffic(a, rates, k_periods, seed):
    """Sample hidden route counts and their link aggregates in one call."""
    x = sample_sd_traffic(rates, k_periods, seed)
    return TrafficSample(x=x, y=link_counts(a, x), seed=int(seed))


def _free_search_order(p):
    """Free columns in ascending original-column order, as DFS levels."""
    return np.sort(p.free_cols)


def enumerate_feasible(p, y, cap=DEFAULT_CAP):
    """All nonnegative integer route-count vectors with ``A X = Y``.

    Depth-first search over the free coordinates (ascending column index)
    with capacity pruning on the residual link counts; a candidate is kept
    iff the implied pivot counts are nonnegative integers.  The result is
    duplicate-free and sorted lexicographically.

    ``cap`` is a safety valve: exploring more than ``cap ** n_free`` nodes
    raises :class:`BudgetExceededError` with a partial-count diagnostic.
    """
    y = np.asarray(y)
    if y.shape != (p.r,):
        raise ValueError(f"y has shape {y.shape}, expected ({p.r},)")
    if (y < 0).any():
        raise ValueError("link counts must be nonnegative")
    y = y.astype(np.int64)
    a = p.matrix
    c = p.c
    order = _free_search_order(p)
    n_free = len(order)
    budget = float(cap) ** n_free

    if n_free == 0:
        x1 = p.a1_inv @ y.astype(float)
        x1r = np.rint(x1)
        if (np.abs(x1 - x1r) <= INTEGRALITY_TOL).all() and (x1r >= 0).all():
            x = np.empty((1, c), dtype=np.int64)
            x[0, p.pivot_cols] = x1r.astype(np.int64)
            return x
        return np.zeros((0, c), dtype=np.int64)

    vals = np.zeros((1, 0), dtype=np.int64)
    resid = y[None, :].copy()
    nodes = 0
    for j in order:
        links = np.flatnonzero(a[:, j])
        bound = resid[:, links].min(axis=1)
        reps = bound + 1
        total = int(reps.sum())
        nodes += total
        if nodes > budget:
            raise BudgetExceededError(
                f"feasible-set search exceeded {cap}^{n_free} nodes",
                nodes_visited=nodes,
                partial_count=0,
            )
        idx = np.repeat(np.arange(len(reps)), reps)
        offs = np.arange(total) - np.repeat(np.cumsum(reps) - reps, reps)
        vals = np.concatenate([vals[idx], offs[:, None]], axis=1)
        resid = resid[idx] - offs[:, None] * a[:, j][None, :]

    x1 = resid.astype(float) @ p.a1_inv.T
    x1r = np.rint(x1)
    ok = (np.abs(x1 - x1r) <= INTEGRALITY_TOL).all(axis=1) & (x1r >= -0.5).all(axis=1)
    x = np.zeros((int(ok.sum()), c), dtype=np.int64)
    x[:, order] = vals[ok]
    x[:, p.pivot_cols] = x1r[ok].astype(np.int64)
    # integer verification closes any floating-point gap
    exact = (x @ a.T == y[None, :]).all(axis=1) & (x >= 0).all(axis=1)
    x = x[exact]
    return x[np.lexsort(x.T[::-1])]


def feasible_count_bounds(a, y):
    """Per-route capacity bounds min over links on the route of y."""
    a = np.asarray(a)
    y = np.asarray(y)
    big = y.max(initial=0) + 1
    masked = np.where(a.astype(bool), y[:, None], big)
    return masked.min(axis=0)


def save_traffic_csv(sample, csv_path, rates=None, extra_meta=None):
    """Write a sample as ``period,kind,index,count`` rows plus a JSON sidecar.

    The sidecar (same path with a .json suffix) records the seed and, when
    given, the true rate vector.
    """
    csv_path = str(csv_path)
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "kind", "index", "count"])
        for k in range(sample.k_periods):
            for j, v in enumerate(sample.x[k]):
                w.writerow([k, "x", j, int(v)])
            for i, v in enumerate(sample.y[k]):
                w.writerow([k, "y", i, int(v)])
    meta = {
        "schema": 1,
        "seed": sample.seed,
        "k_periods": int(sample.k_periods),
        "n_routes": int(sample.x.shape[1]),
        "n_links": int(sample.y.shape[1]),
    }
    if rates is not None:
        meta["rates"] = [float(v) for v in np.asarray(rates)]
    if extra_meta:
        meta.update(extra_meta)
    sidecar = csv_path + ".json" if not csv_path.endswith(".csv") else csv_path[:-4] + ".json"
    with open(sidecar, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar


def load_traffic_csv(csv_path):
    """Read a traffic CSV (and sidecar when present); returns (sample, meta).

    Files holding only ``y`` rows yield a sample whose ``x`` is None.
    """
    csv_path = str(csv_path)
    xs, ys = {}, {}
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            k = int(row["period"])
            target = xs if row["kind"] == "x" else ys
            target.setdefault(k, {})[int(row["index"])] = int(row["count"])
    if not ys:
        raise ValueError(f"no link-count rows in {csv_path}")
    periods = sorted(ys)
    r = max(ys[periods[0]]) + 1
    y = np.zeros((len(periods), r), dtype=np.int64)
    for row_i, k in enumerate(periods):
        for i, v in ys[k].items():
            y[row_i, i] = v
    x = None
    if xs:
        c = max(xs[periods[0]]) + 1
        x = np.zeros((len(periods), c), dtype=np.int64)
        for row_i, k in enumerate(periods):
            for j, v in xs[k].items():
                x[row_i, j] = v
    meta = {}
    sidecar = csv_path[:-4] + ".json" if csv_path.endswith(".csv") else csv_path + ".json"
    try:
        with open(sidecar) as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        pass
    sample = TrafficSample(x=x, y=y, seed=int(meta.get("seed", -1)))
    return sample, meta
