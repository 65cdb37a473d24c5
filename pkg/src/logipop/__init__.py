"""Parameter identification for a stochastic logistic population model.

A population observed through a noisy affine output is modeled as a
grid-discretized hidden Markov chain.  The package simulates the model,
computes smoothing posteriors with scaled forward-backward recursions,
and estimates the six parameters (r, K, a, b, sigma, tau) two ways: a
batch EM-style fit (`fit_aig`) and an online recursive estimator
(`fit_are`).  Brute-force oracles validate both against exhaustive
enumeration and finite-difference gradient checks.
"""

from .errors import (
    CarryingCapacitySignError,
    EmissionUnderflowError,
    GridCoverageError,
    LogipopError,
    NumericalError,
    OracleBudgetError,
    SimulationDivergedError,
    UnderflowError,
    UnidentifiableParameterError,
    ValidationError,
)
from .model import (
    OVERFLOW_BOUND,
    SIGMA_FLOOR,
    TAU_FLOOR,
    Lambda,
    SimConfig,
    Trajectory,
    logistic_exact,
    logistic_step,
    observe,
    read_trajectory_csv,
    simulate,
    write_trajectory_csv,
)
from .grid import (
    InitialPrior,
    StateGrid,
    TransitionModel,
    build_grid,
    default_grid,
    emission_matrix,
    emission_weights,
    initial_prior,
    needs_rebuild,
    quantize,
    transition_matrix,
)
from .forward_backward import FBResult, backward, forward, posteriors
from .offline import (
    VARIANT_EXACT,
    VARIANT_VERBATIM,
    FitReport,
    IterateRecord,
    SufficientStats,
    accumulate_stats,
    fit_aig,
    q_value,
    reestimate,
)
from .online import (
    AREState,
    StepSchedule,
    are_init,
    are_step,
    convex_update,
    coords_to_lambda,
    epsilon,
    fit_are,
    lambda_to_coords,
    step_statistics,
)
from .oracle import (
    DEFAULT_BUDGET,
    OracleBudget,
    brute_force_from_matrices,
    brute_force_likelihood,
    fd_grad_q,
    wls_mstep,
)

__version__ = "0.1.0"
