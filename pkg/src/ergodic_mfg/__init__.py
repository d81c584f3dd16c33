"""Numerical toolkit for finite-state ergodic mean field games.

Stationary and time-dependent MFG systems, a deep Galerkin solver for the
ergodic master equation, exact simulation of the n-player game, exact
birth-death analysis for two states and large-deviation rate functions.
"""

from .birth_death import (
    BirthDeathChain,
    CountDistribution,
    bd_rates,
    bd_stationary,
    exact_cost,
    full_chain_cost,
    per_player_rates,
)
from .dgm import (
    DgmConfig,
    TrainedNetwork,
    loss,
    loss_and_grad,
    master_residual,
    master_residuals,
    residual_mse,
    sample_simplex,
    simplex_derivative,
    train,
)
from .errors import (
    DivergenceError,
    DomainError,
    InfeasiblePathError,
    InvalidInputError,
    IterationLimitError,
    MFGError,
    OutOfRegimeError,
    StepSizeError,
)
from .large_deviations import (
    ControlledPath,
    RateFunction,
    RateFunctionTable,
    action_functional,
    action_integrand,
    finite_time_rate,
    ld_consistency_check,
    count_chain_log_sum,
    log_sum_check,
    matched_rates,
    r_function,
    rate_function_d2,
    tau,
    tau_star,
    variational_norm,
)
from .model import (
    ModelParams,
    finite_difference,
    hamiltonian,
    mean_field_cost,
    optimal_selector,
    running_cost,
)
from .network import ConstantPotential, PotentialNetwork
from .simulator import (
    SimResult,
    deviation_benefit,
    estimate_cost,
    propagation_error,
    simulate,
)
from .strategies import (
    DeviationProfile,
    MasterEquationProfile,
    StationaryProfile,
    TimeDependentProfile,
    constant_network_profile,
)
from .systems import (
    MeasurePath,
    StationarySolution,
    kolmogorov_forward,
    rate_matrix_from_potential,
    solve_stationary,
    solve_stationary_closed_form,
    solve_stationary_fixed_point,
    stationary_dist_of_rate_matrix,
)

__version__ = "0.1.0"
