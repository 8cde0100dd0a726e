"""Random average process, its dual space-time random walk, and the
n^{1/4} fluctuation theory: exact constants, covariance kernels,
Green-function oracles, and reproducible Monte Carlo experiments."""

__version__ = "0.1.0"

from .weights import (
    Deterministic,
    DirichletWindow,
    FiniteMixture,
    TwoPointBeta,
    WeightLaw,
    annealed_vector,
    drift_moments,
    law_from_config,
    second_moments,
    validate,
)
from .environment import SeededEnvironment, TableEnvironment
from .analytics import (
    Constants,
    CovParams,
    beta_quadrature,
    beta_two_point,
    char_lambdas,
    constants_for,
    forward_mean_coefficient,
    gamma_0,
    gamma_q,
    gaussian_helpers,
    psi,
    rap_covariance,
    rap_covariance_temporal,
    stationary_temporal_covariance,
)
from .green import (
    GreenTable,
    LatticeKernel,
    PerturbedWalk,
    beta_from_potential,
    beta_via_potential,
    green_asymptotics_report,
    green_table,
    potential_kernel,
    q_kernels,
)
from .rap import (
    HeightWindow,
    IncrementWindow,
    InitProfile,
    ObservationGrid,
    dual_height,
    evolve,
    increment_step_two_point,
    init_heights,
    invariance_test,
    named_profile,
    z_n,
    z_n_batch,
)
from .rwre import (
    QuenchedDistribution,
    ScaledProcessPoint,
    a_n,
    a_n_samples,
    difference_variance_check,
    moderate_deviation_probe,
    propagate,
    quenched_mean_by_drifts,
    quenched_mean_variance,
    y_n,
    y_n_samples,
)
from .stats import covariance_estimate, ks_statistic, scaling_fit
from .harness import ExperimentConfig, ExperimentResult, run
