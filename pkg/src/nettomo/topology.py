"""Network descriptions, routing matrices, and the invertible/free column split.

A network is a set of named nodes, an ordered list of directed links, and an
ordered list of source-destination (SD) routes, each route a sequence of link
indices.  The routing matrix ``A`` is the r x c binary matrix with
``A[i, j] = 1`` iff link ``i`` lies on route ``j``; observed link counts then
satisfy ``Y = A @ X`` for latent per-route counts ``X``.

Routing matrices are handled as plain integer ndarrays; ``Network`` and
``Partition`` are immutable containers.  All functions are pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidTopologyError, RankDeficiencyError

__all__ = [
    "Network",
    "Partition",
    "sd_pair_count",
    "build_routing_matrix",
    "validate_routing_matrix",
    "check_identifiability",
    "check_capacity_bound",
    "partition",
    "solve_x1",
    "assemble",
    "load_network",
    "network_from_dict",
    "four_node_network",
]

# Relative diagonal threshold below which a pivot counts as numerically zero.
RANK_TOL = 1e-10


def sd_pair_count(n):
    """Number of ordered SD pairs in a fully routed n-node network: (n-1)*n."""
    if n < 2:
        raise InvalidTopologyError(f"need at least 2 nodes, got {n}")
    return (n - 1) * n


@dataclass(frozen=True)
class Network:
    """Immutable network description.

    Parameters
    ----------
    nodes : tuple of str
        Node names; length n >= 2.
    links : tuple of (str, str)
        Directed links as (source, target) name pairs; length r.
    sd_paths : tuple of (str, str, tuple of int)
        Routes as (source, destination, link index sequence).  Path order
        defines the column order of the routing matrix.
    """

    nodes: tuple = ()
    links: tuple = ()
    sd_paths: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(
            self, "links", tuple((str(u), str(v)) for u, v in self.links)
        )
        object.__setattr__(
            self,
            "sd_paths",
            tuple((str(s), str(d), tuple(int(l) for l in ls)) for s, d, ls in self.sd_paths),
        )
        self._validate()

    @property
    def n(self):
        return len(self.nodes)

    @property
    def r(self):
        return len(self.links)

    @property
    def c(self):
        return len(self.sd_paths)

    def _validate(self):
        if self.n < 2:
            raise InvalidTopologyError(f"need at least 2 nodes, got {self.n}")
        if len(set(self.nodes)) != self.n:
            raise InvalidTopologyError("duplicate node names")
        known = set(self.nodes)
        for u, v in self.links:
            if u not in known or v not in known:
                raise InvalidTopologyError(f"link ({u},{v}) references unknown node")
            if u == v:
                raise InvalidTopologyError(f"self-loop link ({u},{v})")
        for s, d, ls in self.sd_paths:
            if s not in known or d not in known:
                raise InvalidTopologyError(f"path {s}->{d} references unknown node")
            if not ls:
                raise InvalidTopologyError(f"path {s}->{d} has no links")
            for l in ls:
                if not 0 <= l < self.r:
                    raise InvalidTopologyError(
                        f"path {s}->{d} references unknown link index {l}"
                    )
            # the link sequence must form a contiguous walk from s to d
            here = s
            for l in ls:
                u, v = self.links[l]
                if u != here:
                    raise InvalidTopologyError(
                        f"path {s}->{d}: link {l} starts at {u}, expected {here}"
                    )
                here = v
            if here != d:
                raise InvalidTopologyError(f"path {s}->{d} ends at {here}")
        if not self._strongly_connected():
            raise InvalidTopologyError("network is not strongly connected")
        # a fully routed network has exactly (n-1)*n SD pairs, all distinct
        pairs = [(s, d) for s, d, _ in self.sd_paths]
        if len(set(pairs)) != len(pairs):
            raise InvalidTopologyError("duplicate SD pair in path list")

    def _strongly_connected(self):
        index = {name: i for i, name in enumerate(self.nodes)}
        adj = [[] for _ in range(self.n)]
        for u, v in self.links:
            adj[index[u]].append(index[v])

        def reach(start, graph):
            seen = {start}
            stack = [start]
            while stack:
                for w in graph[stack.pop()]:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            return seen

        if len(reach(0, adj)) != self.n:
            return False
        radj = [[] for _ in range(self.n)]
        for u, v in self.links:
            radj[index[v]].append(index[u])
        return len(reach(0, radj)) == self.n

    def fully_routed(self):
        """True when every ordered node pair has a route."""
        return self.c == sd_pair_count(self.n)


def network_from_dict(doc):
    """Build a Network from the topology-file dictionary layout.

    Expected keys: ``nodes`` (list of names), ``links`` (list of name pairs),
    ``paths`` (list of ``{"src", "dst", "links"}`` with 0-based link indices).
    Path order defines the SD column order.
    """
    try:
        nodes = doc["nodes"]
        links = [tuple(l) for l in doc["links"]]
        paths = [(p["src"], p["dst"], tuple(p["links"])) for p in doc["paths"]]
    except (KeyError, TypeError) as exc:
        raise InvalidTopologyError(f"malformed topology document: {exc}") from exc
    return Network(nodes=nodes, links=links, sd_paths=paths)


def load_network(path):
    """Read a Network from a JSON topology file."""
    with open(path) as fh:
        return network_from_dict(json.load(fh))


def build_routing_matrix(net):
    """Routing matrix of ``net``: entry (i, j) is 1 iff link i lies on route j."""
    a = np.zeros((net.r, net.c), dtype=np.int64)
    for j, (_, _, ls) in enumerate(net.sd_paths):
        a[list(ls), j] = 1
    return a


def validate_routing_matrix(a):
    """Check the structural invariants of a routing matrix, raising on failure.

    Entries must be 0/1, no link row may be empty (the link would not be part
    of the network) and no route column may be empty (the SD pair would not be
    connected by a path).
    """
    a = np.asarray(a)
    if a.ndim != 2:
        raise InvalidTopologyError("routing matrix must be 2-D")
    if not np.isin(a, (0, 1)).all():
        raise InvalidTopologyError("routing matrix entries must be 0 or 1")
    if (a.sum(axis=1) == 0).any():
        rows = np.flatnonzero(a.sum(axis=1) == 0)
        raise InvalidTopologyError(f"all-zero link rows {rows.tolist()}")
    if (a.sum(axis=0) == 0).any():
        cols = np.flatnonzero(a.sum(axis=0) == 0)
        raise InvalidTopologyError(f"all-zero route columns {cols.tolist()}")
    return a


def check_identifiability(a):
    """True iff rate recovery is identifiable: columns pairwise distinct, none zero."""
    a = np.asarray(a)
    if (a.sum(axis=0) == 0).any():
        return False
    return np.unique(a, axis=1).shape[1] == a.shape[1]


def check_capacity_bound(a):
    """True (warn) iff c > 2**r - 1, i.e. more routes than distinguishable columns."""
    r, c = np.asarray(a).shape
    return c > 2 ** int(r) - 1


@dataclass(frozen=True)
class Partition:
    """Column split ``A[:, perm] = [A1 | A2]`` with invertible leading block.

    ``perm[:r]`` are the pivot columns (routes determined by the rest),
    ``perm[r:]`` the free columns.  ``a1_inv`` is cached so that recovering
    the pivot counts from link counts and free counts is a single
    matrix-vector product.
    """

    perm: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    a1_inv: np.ndarray
    diag_r: np.ndarray = field(repr=False, default=None)

    @property
    def r(self):
        return self.a1.shape[0]

    @property
    def c(self):
        return len(self.perm)

    @property
    def pivot_cols(self):
        return self.perm[: self.r]

    @property
    def free_cols(self):
        return self.perm[self.r :]

    @property
    def matrix(self):
        """The original routing matrix, reassembled from the split."""
        a = np.zeros((self.r, self.c), dtype=np.int64)
        a[:, self.pivot_cols] = self.a1
        if self.a2.size:
            a[:, self.free_cols] = self.a2
        return a


def _qr_column_pivot(a):
    """Householder QR with column pivoting.

    Pivot rule: largest remaining trailing-column norm, ties broken by lowest
    original column index.  Returns the permutation and the |diagonal| of R.
    """
    a = np.asarray(a, dtype=float)
    r, c = a.shape
    work = a.copy()
    perm = np.arange(c)
    diag = np.zeros(min(r, c))
    for k in range(min(r, c)):
        norms = np.sqrt((work[k:, k:] ** 2).sum(axis=0))
        mx = norms.max()
        if mx <= 0.0:
            break
        cand = np.flatnonzero(norms >= mx * (1.0 - 1e-12))
        best = cand[np.argmin(perm[k + cand])]
        piv = k + best
        if piv != k:
            work[:, [k, piv]] = work[:, [piv, k]]
            perm[[k, piv]] = perm[[piv, k]]
        x = work[k:, k]
        nx = np.linalg.norm(x)
        diag[k] = nx
        if nx <= 0.0:
            continue
        v = x.copy()
        v[0] += np.copysign(nx, x[0] if x[0] != 0 else 1.0)
        vn = np.linalg.norm(v)
        if vn > 0.0:
            v /= vn
            work[k:, :] -= 2.0 * np.outer(v, v @ work[k:, :])
    return perm, diag


def partition(a):
    """Split a full-row-rank routing matrix into ``[A1 | A2]`` with A1 invertible.

    The r pivot columns are found by column-pivoted orthogonal factorization;
    raises :class:`RankDeficiencyError` carrying redundant row indices when
    the rows of ``a`` are linearly dependent.
    """
    a = np.asarray(a)
    if a.ndim != 2:
        raise InvalidTopologyError("routing matrix must be 2-D")
    r, c = a.shape
    if c < r:
        raise RankDeficiencyError(
            f"fewer routes ({c}) than links ({r}); rows cannot be independent",
            redundant_rows=_redundant_rows(a),
        )
    perm, diag = _qr_column_pivot(a)
    rank = int((np.abs(diag) > RANK_TOL * np.abs(diag).max()).sum()) if diag.size else 0
    if rank < r:
        raise RankDeficiencyError(
            f"routing matrix has row rank {rank} < {r}; "
            "one or more link rows are redundant and can be deleted",
            redundant_rows=_redundant_rows(a),
        )
    a1 = a[:, perm[:r]].astype(np.int64)
    a2 = a[:, perm[r:]].astype(np.int64)
    a1_inv = np.linalg.inv(a1.astype(float))
    return Partition(perm=perm, a1=a1, a2=a2, a1_inv=a1_inv, diag_r=diag)


def _redundant_rows(a):
    """Row indices that are linear combinations of the preceding independent ones."""
    perm, diag = _qr_column_pivot(np.asarray(a, dtype=float).T)
    thresh = RANK_TOL * np.abs(diag).max() if diag.size else 0.0
    rank = int((np.abs(diag) > thresh).sum())
    return sorted(int(i) for i in perm[rank:])


def solve_x1(p, y, x2):
    """Pivot-route counts implied by link counts and free-route counts.

    Computes ``X1 = A1^{-1} (Y - A2 X2)`` as a real vector; the caller is
    responsible for checking nonnegativity and integrality.
    """
    y = np.asarray(y, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if y.shape != (p.r,):
        raise ValueError(f"y has shape {y.shape}, expected ({p.r},)")
    if x2.shape != (p.c - p.r,):
        raise ValueError(f"x2 has shape {x2.shape}, expected ({p.c - p.r},)")
    rhs = y if x2.size == 0 else y - p.a2 @ x2
    return p.a1_inv @ rhs


def assemble(p, x1, x2):
    """Full route-count vector in original column order from the split parts."""
    x = np.empty(p.c, dtype=np.asarray(x1).dtype)
    x[p.pivot_cols] = x1
    if len(x2):
        x[p.free_cols] = x2
    return x


def four_node_network():
    """The classic four-node, seven-link demonstration network.

    Nodes a, b, c, d with links a->b, a->c, b->a, b->c, c->b, c->d, d->c and
    one fixed route per ordered node pair (12 routes).
    """
    links = [
        ("a", "b"),  # 0
        ("a", "c"),  # 1
        ("b", "a"),  # 2
        ("b", "c"),  # 3
        ("c", "b"),  # 4
        ("c", "d"),  # 5
        ("d", "c"),  # 6
    ]
    paths = [
        ("a", "b", (0,)),
        ("a", "c", (1,)),
        ("a", "d", (1, 5)),
        ("b", "a", (2,)),
        ("b", "c", (3,)),
        ("b", "d", (2, 1, 5)),
        ("c", "a", (4, 2)),
        ("c", "b", (4,)),
        ("c", "d", (5,)),
        ("d", "a", (6, 4, 2)),
        ("d", "b", (6, 4)),
        ("d", "c", (6,)),
    ]
    return Network(nodes=("a", "b", "c", "d"), links=links, sd_paths=paths)
