"""Truncated-series solutions of the quantum BBGKY hierarchy, marginal
functionals of the state and their mean-field limit on finite-dimensional
one-particle spaces."""

from .combinatorics import (
    Cluster, CombinatoricsLimitError, Dissection, Single, bell_number, bounded_compositions,
    cluster_ground, dissections, dissections_bounded, injective_tuples, partitions,
)
from .cumulants import (
    ClusterArgument, declustered_scattering_cumulant, duhamel_residual, partition_cumulant,
    reduced_cumulant, reduced_scattering_cumulant, v2_duhamel_residual, v_operator,
    v_operator_direct, v_operator_recursive,
)
from .model import (
    ModelError, ModelSpec, default_model, group_evolve, hamiltonian, interaction_liouvillian,
    liouvillian, random_model, scattering_operator,
)
from .operators import (
    DimensionError, ManyBodyOperator, MarginalState, embed, full_trace, hermitian_exponential,
    partial_trace, random_density, tensor, tensor_power, trace_norm,
)
from .scaling import (
    SweepSpec, chaos_check, meanfield_sweep, v_scaling_trend, vlasov_rhs, vlasov_series,
)
from .solvers import (
    CONTRACTION_THRESHOLD, AdmissibilityWarning, ContractionConfig, ConvergenceError,
    SeriesConfig, bbgky_marginal, collision_integral, correlation_from_marginals,
    correlation_functional, derivative_consistency, dispersion, equivalence_report,
    invert_initial_data, inversion_report, kinetic_solution, marginal_functional,
    observable_average, product_identity_residual,
)

__version__ = "0.1.0"
