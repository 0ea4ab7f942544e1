"""Reproducible random number generation.

All randomness flows through a counter-based Philox 4x64 bit generator so
that a seed pins the entire stream.  Poisson variates are drawn by sequential
inversion for small means (one uniform per draw) and by Hormann's transformed
rejection (PTRS) for large means; the switch point is internal.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["make_rng", "poisson"]

# above this mean, sequential inversion needs too many steps; switch to PTRS
_INVERSION_CUTOFF = 30.0


def make_rng(seed):
    """A numpy Generator backed by the Philox counter-based bit generator."""
    return np.random.Generator(np.random.Philox(seed))


def _poisson_inversion(rng, lam, size):
    """Sequential-search inversion; consumes exactly one uniform per draw."""
    u = rng.random(size)
    out = np.zeros(size, dtype=np.int64)
    p = math.exp(-lam)
    cum = np.full(size, p)
    term = np.full(size, p)
    active = u > cum
    while active.any():
        out[active] += 1
        k = out[active]
        term[active] *= lam / k
        cum[active] += term[active]
        # term underflow means the tail mass is exhausted at float precision
        active &= (u > cum) & (term > 0.0)
    return out


def _poisson_ptrs(rng, lam, size):
    """Hormann's PTRS transformed-rejection sampler, valid for lam >= 10."""
    b = 0.931 + 2.53 * math.sqrt(lam)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    log_lam = math.log(lam)
    out = np.empty(size, dtype=np.int64)
    for i in range(size):
        while True:
            u = rng.random() - 0.5
            v = rng.random()
            us = 0.5 - abs(u)
            k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
            if us >= 0.07 and v <= v_r:
                out[i] = k
                break
            if k < 0 or (us < 0.013 and v > us):
                continue
            if math.log(v * inv_alpha / (a / (us * us) + b)) <= (
                k * log_lam - lam - math.lgamma(k + 1.0)
            ):
                out[i] = k
                break
    return out


def poisson(rng, lam, size):
    """``size`` iid Poisson(lam) draws from ``rng``; deterministic given the stream."""
    lam = float(lam)
    if lam < 0:
        raise ValueError(f"rate must be nonnegative, got {lam}")
    if lam == 0.0:
        return np.zeros(size, dtype=np.int64)
    if lam < _INVERSION_CUTOFF:
        return _poisson_inversion(rng, lam, size)
    return _poisson_ptrs(rng, lam, size)
