"""Exception types shared across the toolkit."""


class InvalidTopologyError(ValueError):
    """A network description or routing matrix violates a structural invariant."""


class RankDeficiencyError(ValueError):
    """Routing matrix does not have full row rank.

    One or more link equations are redundant; ``redundant_rows`` lists row
    indices that can be deleted to restore independence.
    """

    def __init__(self, message, redundant_rows=()):
        super().__init__(message)
        self.redundant_rows = tuple(redundant_rows)


class BudgetExceededError(RuntimeError):
    """Feasible-set search exceeded its node budget.

    ``nodes_visited`` counts explored candidates, ``partial_count`` the
    solutions found before the budget ran out.
    """

    def __init__(self, message, nodes_visited=0, partial_count=0):
        super().__init__(message)
        self.nodes_visited = int(nodes_visited)
        self.partial_count = int(partial_count)


class InconsistentObservationError(ValueError):
    """No nonnegative integer route-count vector reproduces the observed link counts."""


class InfeasibleStateError(RuntimeError):
    """A sampler state stopped satisfying the link-count constraint (corrupted chain)."""
