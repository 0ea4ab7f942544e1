"""Network tomography toolkit.

Estimates source-destination traffic intensities from observed link counts
under the linear Poisson model Y = A X (EM, Gaussian likelihood, moments,
and Gibbs posterior simulation), and provides closed-form spoofed-address
DoS detection math plus Dirichlet-multinomial Bayes-factor traffic scoring.
"""

from .errors import (
    BudgetExceededError,
    InconsistentObservationError,
    InfeasibleStateError,
    InvalidTopologyError,
    RankDeficiencyError,
)
from .topology import (
    Network,
    Partition,
    assemble,
    build_routing_matrix,
    check_capacity_bound,
    check_identifiability,
    four_node_network,
    load_network,
    network_from_dict,
    partition,
    sd_pair_count,
    solve_x1,
    validate_routing_matrix,
)
from .rng import make_rng, poisson
from .simulate import (
    TrafficSample,
    enumerate_feasible,
    link_counts,
    load_traffic_csv,
    sample_sd_traffic,
    save_traffic_csv,
    simulate_traffic,
)
from .estimators import (
    EmConfig,
    EstimateReport,
    em_fit,
    estep_exact,
    estep_normal,
    gaussian_fit,
    gaussian_loglik,
    gaussian_loglik_grad,
    moment_fit,
    moment_system,
    observed_loglik,
)
from .gibbs import (
    ChainConfig,
    ChainState,
    GammaPrior,
    PosteriorSummary,
    initialize_state,
    run_chain,
    sample_lambda,
    sample_x2_coordinate,
    support_bounds,
)
from .detect import (
    MonitorConfig,
    attack_size_mle,
    detection_probability,
    expected_gap,
    expected_observed,
    observed_count_pmf,
)
from .bayesfactor import (
    DirichletParams,
    PacketSequence,
    TransitionProfile,
    bayes_factor,
    dirichlet_logpdf,
    dirichlet_posterior,
    dm_marginal_logpmf,
    fit_dirichlet_moments,
    load_profile,
    save_profile,
    seq_loglik_h0,
    seq_loglik_h1,
    update_profile,
)

__version__ = "0.1.0"
