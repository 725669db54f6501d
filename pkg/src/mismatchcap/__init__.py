"""Upper and lower bounds for additive-metric decoding over finite channels.

The package computes achievable rates (GMI, LM), multi-letter converse
bounds built from surely-degraded broadcast couplings, composition-
dependent variants solved by support-pattern enumeration, pairwise
channel-metric comparisons with checkable coupling certificates, and a
Monte-Carlo harness for the containment property those couplings imply.
"""

from .achievable import RateProblem, gmi_rate, lm_rate, lm_rate_max
from .cc_bounds import (
    CcBoundResult,
    CcMembership,
    cc_bound_desk,
    gamma_cc_membership,
    gamma_star_membership,
)
from .converse import BoundResult, export_trace, kg_bound, sd_bound
from .errors import (
    CompositionOrderError,
    ConvergenceError,
    DimensionMismatchError,
    EmptyFeasibleSetError,
    InvalidDistributionError,
    MalformedInputError,
    SizeCapError,
)
from .metrics import (
    AdditiveMetric,
    GammaFeasibility,
    GammaMembership,
    SupportPattern,
    SupportSet,
    add_input_score,
    gamma_k_membership,
    gamma_membership,
    gamma_nonempty_given_marginal,
    lift_metric,
    log_likelihood_metric,
    support_set,
    tau,
    tau_table,
)
from .optim import (
    DEFAULT_CONFIG,
    FwResult,
    LinearProgram,
    LpResult,
    SolverConfig,
    grid_minimax_oracle,
    lp_solve,
    min_convex_over_polytope,
    simplex_grid,
)
from .probability import (
    BroadcastChannel,
    JointPmf,
    ProbVector,
    RateValue,
    StochasticMatrix,
    channel_capacity,
    compose_channels,
    conditional_kl,
    correct_decoding_exponent,
    entropy,
    kl_divergence,
    mutual_information,
    product_channel,
)
from .relations import (
    IsomorphicResult,
    RelationCertificate,
    SuperiorResult,
    compose_superiority,
    isomorphic,
    matched_pair_scan,
    superior,
    superior_cc,
    tightness_certificate,
)
from .simulate import (
    MODE_CONSTANT_COMPOSITION,
    MODE_IID,
    ErrorRateReport,
    SimConfig,
    SimReport,
    estimate_error_rates,
    simulate_containment,
)

__all__ = [
    "AdditiveMetric",
    "BoundResult",
    "BroadcastChannel",
    "CcBoundResult",
    "CcMembership",
    "CompositionOrderError",
    "ConvergenceError",
    "DEFAULT_CONFIG",
    "DimensionMismatchError",
    "EmptyFeasibleSetError",
    "ErrorRateReport",
    "FwResult",
    "GammaFeasibility",
    "GammaMembership",
    "InvalidDistributionError",
    "IsomorphicResult",
    "JointPmf",
    "LinearProgram",
    "LpResult",
    "MalformedInputError",
    "MODE_CONSTANT_COMPOSITION",
    "MODE_IID",
    "ProbVector",
    "RateProblem",
    "RateValue",
    "RelationCertificate",
    "SimConfig",
    "SimReport",
    "SizeCapError",
    "SolverConfig",
    "StochasticMatrix",
    "SuperiorResult",
    "SupportPattern",
    "SupportSet",
    "add_input_score",
    "cc_bound_desk",
    "channel_capacity",
    "compose_channels",
    "compose_superiority",
    "conditional_kl",
    "correct_decoding_exponent",
    "entropy",
    "estimate_error_rates",
    "export_trace",
    "gamma_cc_membership",
    "gamma_k_membership",
    "gamma_membership",
    "gamma_nonempty_given_marginal",
    "gamma_star_membership",
    "gmi_rate",
    "grid_minimax_oracle",
    "isomorphic",
    "kg_bound",
    "kl_divergence",
    "lift_metric",
    "lm_rate",
    "lm_rate_max",
    "log_likelihood_metric",
    "lp_solve",
    "matched_pair_scan",
    "min_convex_over_polytope",
    "mutual_information",
    "product_channel",
    "sd_bound",
    "simplex_grid",
    "simulate_containment",
    "superior",
    "superior_cc",
    "support_set",
    "tau",
    "tau_table",
    "tightness_certificate",
]
