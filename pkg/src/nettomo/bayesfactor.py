"""Dirichlet-multinomial Bayes-factor scoring of packet sequences.

Each sender has a historical transition profile: a row-stochastic matrix of
probabilities that an SD label follows another.  A fresh sequence is scored
against two hypotheses - it was generated from the profile (H0), or its
labels were drawn exchangeably from an unknown probability vector with a
Dirichlet prior (H1).  The log Bayes factor ("weight of evidence") is
log P(seq|H1) - log P(seq|H0); large positive values flag anomalous traffic.

Both hypotheses condition on the first label: only transitions are scored,
since the hypotheses specify transition laws and nothing about the start.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "DirichletParams",
    "TransitionProfile",
    "PacketSequence",
    "dirichlet_logpdf",
    "dm_marginal_logpmf",
    "dirichlet_posterior",
    "seq_loglik_h0",
    "seq_loglik_h1",
    "bayes_factor",
    "update_profile",
    "fit_dirichlet_moments",
    "save_profile",
    "load_profile",
    "sequences_from_rows",
]

SIMPLEX_TOL = 1e-10


@dataclass(frozen=True)
class DirichletParams:
    """Dirichlet hyperparameters; all entries strictly positive."""

    alpha: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        if self.alpha.ndim != 1 or (self.alpha <= 0).any():
            raise ValueError("alpha must be a vector of positive reals")

    @property
    def k(self):
        return len(self.alpha)

    @property
    def total(self):
        return float(self.alpha.sum())


@dataclass(frozen=True)
class PacketSequence:
    """Ordered SD-label indices C_0..C_T observed from one sender."""

    events: np.ndarray
    sender_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "events", np.asarray(self.events, dtype=np.int64))
        if self.events.ndim != 1 or len(self.events) < 2:
            raise ValueError("a sequence needs at least two packets")
        if (self.events < 0).any():
            raise ValueError("state indices must be nonnegative")

    @property
    def t_transitions(self):
        return len(self.events) - 1


@dataclass(frozen=True)
class TransitionProfile:
    """Per-sender stochastic matrix of SD-label transition probabilities.

    ``counts`` retains the raw transition tallies so the profile can be
    updated incrementally; ``probs`` is the smoothed row-normalised matrix.
    """

    states: tuple
    probs: np.ndarray
    sender_id: str = ""
    counts: np.ndarray = None
    smoothing: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        probs = np.asarray(self.probs, dtype=float)
        k = len(self.states)
        if probs.shape != (k, k):
            raise ValueError(f"probs must be {k}x{k}")
        if (probs < 0).any() or np.abs(probs.sum(axis=1) - 1.0).max() > SIMPLEX_TOL:
            raise ValueError("profile rows must be probability vectors")
        object.__setattr__(self, "probs", probs)
        if self.counts is not None:
            object.__setattr__(self, "counts", np.asarray(self.counts, dtype=float))

    @property
    def k(self):
        return len(self.states)

    @classmethod
    def empty(cls, states, sender_id="", smoothing=0.5):
        k = len(states)
        counts = np.zeros((k, k))
        return cls(
            states=states,
            probs=_smoothed_rows(counts, smoothing),
            sender_id=sender_id,
            counts=counts,
            smoothing=smoothing,
        )


def _smoothed_rows(counts, smoothing):
    k = counts.shape[0]
    totals = counts.sum(axis=1, keepdims=True) + k * smoothing
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = (counts + smoothing) / totals
    # rows never observed and unsmoothed default to uniform
    empty = ~np.isfinite(probs).all(axis=1) | (totals[:, 0] == 0)
    probs[empty] = 1.0 / k
    return probs


def dirichlet_logpdf(p, d):
    """Log density of the Dirichlet distribution at a point of the open simplex."""
    p = np.asarray(p, dtype=float)
    if p.shape != (d.k,):
        raise ValueError(f"p must have length {d.k}")
    if (p <= 0).any() or abs(p.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError("p must lie in the open simplex (positive, summing to 1)")
    a = d.alpha
    return float(gammaln(a.sum()) - gammaln(a).sum() + ((a - 1.0) * np.log(p)).sum())


def dm_marginal_logpmf(n, d):
    """Log marginal pmf of counts under multinomial sampling with Dirichlet prior.

    The rising-factorial form evaluated through log-gamma:
    ``log n! - [lgamma(a+ntot) - lgamma(a)] + sum_k [lgamma(a_k+n_k) -
    lgamma(a_k)] - sum_k log n_k!``.
    """
    n = np.asarray(n, dtype=np.int64)
    if n.shape != (d.k,):
        raise ValueError(f"n must have length {d.k}")
    if (n < 0).any():
        raise ValueError("counts must be nonnegative")
    a = d.alpha
    ntot = float(n.sum())
    return float(
        gammaln(ntot + 1.0)
        - (gammaln(a.sum() + ntot) - gammaln(a.sum()))
        + (gammaln(a + n) - gammaln(a)).sum()
        - gammaln(n + 1.0).sum()
    )


def dirichlet_posterior(d, n):
    """Posterior hyperparameters after observing counts: alpha + n."""
    n = np.asarray(n)
    if n.shape != (d.k,):
        raise ValueError(f"n must have length {d.k}")
    if (n < 0).any():
        raise ValueError("counts must be nonnegative")
    return DirichletParams(alpha=d.alpha + n)


def seq_loglik_h0(seq, prof):
    """Log-likelihood of the transitions under the sender's profile.

    A transition with zero profile probability yields ``-inf`` - a certain
    anomaly signal, not an error.
    """
    ev = seq.events
    if ev.max() >= prof.k:
        raise ValueError("sequence contains a state index outside the profile")
    steps = prof.probs[ev[:-1], ev[1:]]
    if (steps == 0.0).any():
        return -math.inf
    return float(np.log(steps).sum())


def seq_loglik_h1(seq, d):
    """Log marginal likelihood of the transitions under the exchangeable model.

    The labels C_1..C_T are exchangeable given the Dirichlet draw, so the
    ordered-sequence marginal depends only on the visit counts:
    ``[lgamma(atot) - lgamma(atot+T)] + sum_k [lgamma(a_k+m_k) - lgamma(a_k)]``.
    """
    ev = seq.events
    if ev.max() >= d.k:
        raise ValueError("sequence contains a state index outside alpha")
    m = np.bincount(ev[1:], minlength=d.k).astype(float)
    a = d.alpha
    t = float(m.sum())
    return float(
        gammaln(a.sum()) - gammaln(a.sum() + t) + (gammaln(a + m) - gammaln(a)).sum()
    )


def bayes_factor(seq, prof, d):
    """(BF, weight of evidence) comparing exchangeable H1 against profile H0.

    ``woe = log P(seq|H1) - log P(seq|H0)``; the Bayes factor is its exp and
    saturates to ``inf`` when H0 assigns the sequence probability zero.
    Large values favour the anomaly hypothesis.
    """
    h0 = seq_loglik_h0(seq, prof)
    h1 = seq_loglik_h1(seq, d)
    woe = h1 - h0
    try:
        bf = math.exp(woe)
    except OverflowError:
        bf = math.inf
    return bf, woe


def update_profile(prof, seq, smoothing=None):
    """Fold a sequence's transitions into the profile's counts.

    Returns a new profile whose rows are the additively smoothed,
    row-normalised tallies: ``(count + s) / (rowsum + K s)``.
    """
    if smoothing is None:
        smoothing = prof.smoothing
    if smoothing < 0:
        raise ValueError("smoothing must be nonnegative")
    k = prof.k
    ev = seq.events
    if ev.max() >= k:
        raise ValueError("sequence contains a state index outside the profile")
    counts = prof.counts.copy() if prof.counts is not None else np.zeros((k, k))
    np.add.at(counts, (ev[:-1], ev[1:]), 1.0)
    return TransitionProfile(
        states=prof.states,
        probs=_smoothed_rows(counts, smoothing),
        sender_id=prof.sender_id,
        counts=counts,
        smoothing=smoothing,
    )


def fit_dirichlet_moments(count_vectors):
    """Method-of-moments Dirichlet hyperparameters from historical counts.

    Each row is a per-sequence category count vector; proportions are matched
    in mean and variance.  Degenerate inputs fall back to a uniform prior.
    """
    counts = np.asarray(count_vectors, dtype=float)
    if counts.ndim != 2 or counts.shape[0] < 2:
        raise ValueError("need at least two count vectors")
    totals = counts.sum(axis=1, keepdims=True)
    if (totals == 0).any():
        raise ValueError("every count vector needs at least one observation")
    props = counts / totals
    mean = props.mean(axis=0)
    var = props.var(axis=0)
    usable = (var > 0) & (mean > 0) & (mean < 1)
    if not usable.any():
        return DirichletParams(alpha=np.ones(counts.shape[1]))
    s = (mean[usable] * (1.0 - mean[usable]) / var[usable] - 1.0).mean()
    if s <= 0:
        return DirichletParams(alpha=np.ones(counts.shape[1]))
    alpha = np.maximum(s * mean, 1e-6)
    return DirichletParams(alpha=alpha)


def save_profile(directory, prof):
    """Write ``<directory>/<sender>.json`` with states, matrix, counts, smoothing."""
    os.makedirs(directory, exist_ok=True)
    doc = {
        "schema": 1,
        "sender_id": prof.sender_id,
        "states": list(prof.states),
        "matrix": [[float(v) for v in row] for row in prof.probs],
        "counts": [[float(v) for v in row] for row in (
            prof.counts if prof.counts is not None else np.zeros((prof.k, prof.k))
        )],
        "smoothing": float(prof.smoothing),
    }
    path = os.path.join(directory, f"{prof.sender_id}.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_profile(directory, sender_id):
    """Read a sender profile written by :func:`save_profile`."""
    path = os.path.join(directory, f"{sender_id}.json")
    with open(path) as fh:
        doc = json.load(fh)
    return TransitionProfile(
        states=doc["states"],
        probs=np.asarray(doc["matrix"], dtype=float),
        sender_id=doc.get("sender_id", sender_id),
        counts=np.asarray(doc["counts"], dtype=float),
        smoothing=float(doc.get("smoothing", 0.5)),
    )


def sequences_from_rows(rows, state_index):
    """Group (t, sender, label) rows into per-sender PacketSequences.

    Rows are ordered by ``t`` within each sender; labels are mapped through
    ``state_index`` (label -> state position).
    """
    by_sender = {}
    for t, sender, label in rows:
        by_sender.setdefault(sender, []).append((int(t), label))
    out = {}
    for sender, items in by_sender.items():
        items.sort(key=lambda it: it[0])
        try:
            ev = [state_index[label] for _, label in items]
        except KeyError as exc:
            raise ValueError(f"unknown SD label {exc} for sender {sender}") from exc
        out[sender] = PacketSequence(events=np.asarray(ev), sender_id=sender)
    return out
