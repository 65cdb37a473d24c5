"""Independent brute-force validators.

Exhaustive path-sum likelihoods, finite-difference gradients of the
re-estimation auxiliary, and a closed-form weighted-least-squares M-step
that duplicates the exact-variant update through a different code path.
None of these share recursion code with the main estimators, so the
equivalence checks in the test and verify suites are evidence rather
than tautology.  A budget guard turns accidental exponential blowup into
a refusal instead of a hang.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CarryingCapacitySignError,
    OracleBudgetError,
    UnidentifiableParameterError,
    ValidationError,
)
from .grid import StateGrid, emission_matrix, initial_prior, transition_matrix
from .model import SIGMA_FLOOR, TAU_FLOOR, Lambda
from .offline import (
    COND_LIMIT,
    SufficientStats,
    q_given_posteriors,
    q_value,
)
from .forward_backward import posteriors


@dataclass(frozen=True)
class OracleBudget:
    """Enumeration limits: an instance must satisfy M**N <= max_paths
    as well as the per-dimension caps."""

    max_paths: int = 10**6
    max_N: int = 6
    max_M: int = 4

    def check(self, N: int, M: int) -> None:
        required = M**N
        if N > self.max_N or M > self.max_M or required > self.max_paths:
            raise OracleBudgetError(
                f"instance (N={N}, M={M}) needs {required} paths; budget allows "
                f"max_N={self.max_N}, max_M={self.max_M}, max_paths={self.max_paths}",
                required_paths=required,
            )


DEFAULT_BUDGET = OracleBudget()


def brute_force_from_matrices(T, emissions, prior, budget: OracleBudget = DEFAULT_BUDGET):
    """Literal path sum of the factorized joint over all M**N grid paths.

    ``T``/``emissions``/``prior`` use the same conventions as the
    forward-backward module (row-stochastic transitions, raw emission
    densities, prior on the first observed state).  Returns
    ``(loglik, gamma, xi)`` with the same shapes and normalizations as
    :class:`~logipop.forward_backward.FBResult`.
    """
    Tm = T.matrix if hasattr(T, "matrix") else np.asarray(T, dtype=float)
    E = np.asarray(emissions, dtype=float)
    pi = prior.weights if hasattr(prior, "weights") else np.asarray(prior, dtype=float)
    N, M = E.shape
    budget.check(N, M)

    # every path as a row of cell indices, shape (M**N, N)
    grids = np.meshgrid(*([np.arange(M)] * N), indexing="ij")
    paths = np.stack(grids, axis=-1).reshape(-1, N)

    weights = pi[paths[:, 0]] * E[0, paths[:, 0]]
    for t in range(1, N):
        weights = weights * Tm[paths[:, t - 1], paths[:, t]] * E[t, paths[:, t]]

    total = weights.sum()
    if not (total > 0.0 and np.isfinite(total)):
        raise ValidationError(
            f"path sum is {total}; instance is numerically degenerate"
        )

    gamma = np.empty((N, M))
    for t in range(N):
        gamma[t] = np.bincount(paths[:, t], weights=weights, minlength=M)
    gamma /= total

    xi = np.empty((N - 1, M, M))
    for t in range(1, N):
        flat = paths[:, t - 1] * M + paths[:, t]
        xi[t - 1] = np.bincount(flat, weights=weights, minlength=M * M).reshape(M, M)
    xi /= total

    return float(np.log(total)), gamma, xi


def brute_force_likelihood(
    lam: Lambda,
    grid: StateGrid,
    prior,
    ys,
    h: float,
    budget: OracleBudget = DEFAULT_BUDGET,
):
    """Path-sum likelihood of observed data under the grid HMM kernels.

    Builds the transition and emission kernels with the exact same
    conventions as the main pipeline, then enumerates paths.
    """
    ys = np.asarray(ys, dtype=float)
    pi = prior if hasattr(prior, "weights") else initial_prior(grid, prior)
    T = transition_matrix(lam, grid, h)
    E = emission_matrix(lam, grid, ys)
    return brute_force_from_matrices(T, E, pi, budget)


# ---------------------------------------------------------------------------
# Finite-difference gradient of the normalized auxiliary
# ---------------------------------------------------------------------------

#: Differentiation coordinates: K enters through its reciprocal, matching
#: the coordinate in which the re-estimation updates are derived.
GRAD_COORDS = ("r", "Kinv", "a", "b", "sigma", "tau")


def _perturb(lam: Lambda, index: int, rel: float) -> Lambda:
    """Scale one gradient coordinate by (1 + rel)."""
    if index == 0:
        return lam.replace(r=lam.r * (1.0 + rel) if lam.r != 0 else rel)
    if index == 1:
        return lam.replace(K=lam.K / (1.0 + rel))
    if index == 2:
        return lam.replace(a=lam.a * (1.0 + rel) if lam.a != 0 else rel)
    if index == 3:
        return lam.replace(b=lam.b * (1.0 + rel) if lam.b != 0 else rel)
    if index == 4:
        return lam.replace(sigma=lam.sigma * (1.0 + rel))
    return lam.replace(tau=lam.tau * (1.0 + rel))


def fd_grad_q(
    lam: Lambda,
    lam_prime: Lambda,
    ys,
    grid: StateGrid,
    prior,
    h: float,
    delta: float = 1e-5,
) -> np.ndarray:
    """Central-difference gradient of ``lam' -> Q(lam, lam')`` at ``lam_prime``.

    Differentiates with respect to *relative* perturbations of each of
    (r, 1/K, a, b, sigma, tau) — i.e. the returned components are
    ``dQ/d(log coordinate)``-style scaled gradients, directly comparable
    across parameters of different magnitudes.  Posterior weights are
    computed once under ``lam``.  A component whose perturbed evaluation
    is non-finite comes back as NaN.
    """
    if not (1e-8 < delta < 1e-3):
        raise ValidationError(f"delta must lie in (1e-8, 1e-3), got {delta}")
    ys = np.asarray(ys, dtype=float)
    pi = prior if hasattr(prior, "weights") else initial_prior(grid, prior)
    T = transition_matrix(lam, grid, h)
    E = emission_matrix(lam, grid, ys)
    fb = posteriors(T, E, pi)
    xi_sum = fb.xi.sum(axis=0) if fb.xi.size else np.zeros((grid.M, grid.M))

    def q_at(candidate: Lambda) -> float:
        return q_given_posteriors(
            fb.gamma, xi_sum, pi.weights, ys, grid, candidate, h
        )

    grad = np.empty(6)
    for i in range(6):
        try:
            q_plus = q_at(_perturb(lam_prime, i, +delta))
            q_minus = q_at(_perturb(lam_prime, i, -delta))
        except ValidationError:
            grad[i] = np.nan
            continue
        if not (np.isfinite(q_plus) and np.isfinite(q_minus)):
            grad[i] = np.nan
        else:
            grad[i] = (q_plus - q_minus) / (2.0 * delta)
    return grad


# ---------------------------------------------------------------------------
# Independent closed-form M-step
# ---------------------------------------------------------------------------


def wls_mstep(stats: SufficientStats, h: float) -> Lambda:
    """Weighted least-squares M-step solved with numpy's linear algebra.

    Assembles the two normal-equation systems from the raw moments and
    solves them with ``np.linalg.lstsq`` (the main path uses explicit
    determinant formulas), then forms the variance updates as weighted
    mean squared residuals.  Must agree with the exact-variant
    re-estimate to 1e-9 relative; singular systems raise the same
    unidentifiability errors.
    """
    if stats.w_pair <= 0.0:
        raise UnidentifiableParameterError("r", "no state transitions in the data")

    # state regression: d ~ th1*m - th2*m^2 under pairwise weights
    G = np.array([[stats.p20, -stats.p30], [stats.p30, -stats.p40]])
    rhs = np.array([stats.p11, stats.p21])
    if not np.isfinite(G).all() or np.linalg.cond(G) > COND_LIMIT:
        raise UnidentifiableParameterError("r", "state regression Gram is singular")
    theta, *_ = np.linalg.lstsq(G, rhs, rcond=None)
    th1, th2 = float(theta[0]), float(theta[1])
    if th2 <= 0.0:
        raise CarryingCapacitySignError(th2)
    r_new = th1 / h
    K_new = max(th1 / th2, stats.cell_width)

    # observation regression: y ~ a*m + b under unary weights
    B = np.array([[stats.suu, stats.su], [stats.su, stats.n_obs]])
    rhs_obs = np.array([stats.suy, stats.sy])
    if not np.isfinite(B).all() or np.linalg.cond(B) > COND_LIMIT:
        raise UnidentifiableParameterError("a", "observation regression Gram is singular")
    ab, *_ = np.linalg.lstsq(B, rhs_obs, rcond=None)
    a_new, b_new = float(ab[0]), float(ab[1])

    th = np.array([th1, th2])
    quad = np.array([[stats.p20, -stats.p30], [-stats.p30, stats.p40]])
    lin = np.array([stats.p11, -stats.p21])
    state_ss = max(stats.p02 - 2.0 * float(lin @ th) + float(th @ quad @ th), 0.0)
    sigma_new = max(np.sqrt(state_ss / stats.w_pair), SIGMA_FLOOR)

    ab_vec = np.array([a_new, b_new])
    obs_quad = np.array([[stats.suu, stats.su], [stats.su, stats.n_obs]])
    obs_lin = np.array([stats.suy, stats.sy])
    obs_ss = max(
        stats.syy - 2.0 * float(obs_lin @ ab_vec) + float(ab_vec @ obs_quad @ ab_vec),
        0.0,
    )
    tau_new = max(np.sqrt(obs_ss / stats.n_obs), TAU_FLOOR)

    return Lambda(r=r_new, K=K_new, a=a_new, b=b_new, sigma=sigma_new, tau=tau_new)


__all__ = [
    "OracleBudget",
    "DEFAULT_BUDGET",
    "brute_force_from_matrices",
    "brute_force_likelihood",
    "fd_grad_q",
    "wls_mstep",
    "GRAD_COORDS",
    "q_value",
]
