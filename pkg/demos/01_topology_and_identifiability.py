"""Build a network, inspect its routing matrix, and check identifiability.

The running example is a four-node network with seven directed links and one
fixed route per ordered node pair (12 routes).  Link counts relate to route
counts through the 0/1 routing matrix A: y = A x.
"""
import numpy as np

from nettomo import (
    build_routing_matrix,
    check_capacity_bound,
    check_identifiability,
    four_node_network,
    partition,
    sd_pair_count,
    solve_x1,
)

net = four_node_network()
print(f"nodes: {net.nodes}")
print(f"links ({net.r}):", ", ".join(f"{u}->{v}" for u, v in net.links))
print(f"routes ({net.c}), e.g. route 5:", net.sd_paths[5])
print(f"expected SD pairs for n=4: {sd_pair_count(4)}")

a = build_routing_matrix(net)
print("\nrouting matrix A (rows = links, cols = routes):")
print(a)

# identifiability: all columns distinct and nonzero means the rates are
# recoverable from link statistics alone
print("\nidentifiable:", check_identifiability(a))
print("too many routes for the links (c > 2^r - 1):", check_capacity_bound(a))

# the invertible/free split: pick r independent columns, the rest are free
p = partition(a)
print("\npivot routes:", p.pivot_cols, " free routes:", p.free_cols)

# knowing the free route counts and the link counts determines the rest
rng = np.random.default_rng(1)
x = rng.poisson(4.0, net.c)
y = a @ x
x1 = solve_x1(p, y.astype(float), x[p.free_cols].astype(float))
print("\ntrue pivot counts:   ", x[p.pivot_cols])
print("recovered from links:", np.rint(x1).astype(int))
