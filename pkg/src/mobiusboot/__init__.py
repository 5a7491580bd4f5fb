"""Bootstrap bias correction as Mobius inversion on the partition lattice."""

__version__ = "0.1.0"

from .lattice import (
    Partition,
    LatticeIndex,
    IncidenceMatrix,
    CapExceededError,
    DimensionError,
    bell,
    stirling2,
    falling_factorial,
    enumerate_partitions,
    refines,
    coarsenings,
    cover_edges,
    zeta_matrix,
    mobius_matrix,
    format_partition,
    parse_partition,
)
from .moments import (
    InfeasibleError,
    MissingMomentError,
    LabeledTerm,
    CONSTANT_TERM,
    MomentPolynomial,
    Dataset,
    MomentTable,
    empirical_moment,
    evaluate,
    symmetric_statistic,
    unbiased_evaluate,
    reachable_blocks,
    moments_from_cumulants,
    cumulants_from_moments,
    normal_moment_table,
    polynomial_to_dict,
    polynomial_from_dict,
    dataset_from_csv,
)
from .resampling import (
    SamplingMatrix,
    ReducedMatrix,
    sampling_matrix,
    factorization,
    apply_S,
    reduced_matrix,
    level_sums,
    poly_level_sums,
    one_norm_id_minus_S,
    one_norm_direct,
    one_norm_id_minus_scaled,
    gamma_ratio,
    log_gamma_ratio,
    linear_regime_check,
)
from .debias import (
    StepSchedule,
    BiasRecord,
    BiasReport,
    richardson_debias,
    richardson_neumann,
    nonstationary_debias,
    exact_bias,
    bias_bound,
    general_bound,
    general_bound_at,
    bandlimited_bound,
    neumann_trace_bound,
)
from .mc import (
    EstimatorCoefficients,
    McReport,
    ExperimentRow,
    expansion_coefficients,
    resample,
    mc_estimate,
    exhaustive_estimate,
    normal_sampler,
    bias_experiment,
)
