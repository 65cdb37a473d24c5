"""Finite state grid turning the continuous-state model into an HMM.

Cell centers quantize the population axis.  Transition probabilities come
from the Gaussian state-noise density evaluated between cell centers,
scaled by the cell width and row-renormalized so the chain is exactly
stochastic despite grid truncation.  Emission weights stay raw densities
(no cell-width factor): only their ratios across cells matter, so the
reported log-likelihood is defined up to the additive constant N*ln(du),
and every consumer in this package (forward-backward, oracles, online
filter) uses the same convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmissionUnderflowError, GridCoverageError, ValidationError
from .model import Lambda, logistic_step

#: Default number of cells when a grid is derived from a K guess.
DEFAULT_CELLS = 64

#: Fit loops rebuild the grid when the K estimate leaves the middle half
#: of the span, i.e. K not in [REBUILD_LO, REBUILD_HI] * u_max.
REBUILD_LO = 0.25
REBUILD_HI = 0.75

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class StateGrid:
    """Uniform cells over ``[u_min, u_max]`` with centers ``points``."""

    points: np.ndarray
    cell_width: float
    u_min: float
    u_max: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or len(pts) < 1:
            raise ValidationError("grid needs at least one cell center")
        if self.u_min < 0:
            raise ValidationError(f"u_min must be >= 0, got {self.u_min}")
        if not self.u_min < self.u_max:
            raise ValidationError("need u_min < u_max")
        if self.cell_width <= 0:
            raise ValidationError("cell_width must be > 0")
        if len(pts) > 1:
            spacing = np.diff(pts)
            if np.any(spacing <= 0):
                raise ValidationError("grid centers must be strictly increasing")
            rel_dev = np.max(np.abs(spacing - self.cell_width)) / self.cell_width
            if rel_dev > 1e-12:
                raise ValidationError(
                    f"grid spacing deviates from cell_width by {rel_dev:.2e} relative"
                )

    @property
    def M(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class InitialPrior:
    """Probability vector over grid cells for the first hidden state."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.ndim != 1:
            raise ValidationError("prior weights must be 1-D")
        if np.any(w < 0):
            raise ValidationError("prior weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError(f"prior weights must sum to 1, got {w.sum()!r}")


@dataclass(frozen=True)
class TransitionModel:
    """Row-stochastic M x M matrix of cell-to-cell transition probabilities."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", mat)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValidationError("transition matrix must be square")
        if np.any(mat < 0):
            raise ValidationError("transition probabilities must be nonnegative")
        if np.max(np.abs(mat.sum(axis=1) - 1.0)) > 1e-12:
            raise ValidationError("transition rows must sum to 1")


def build_grid(u_min: float, u_max: float, M: int) -> StateGrid:
    """M uniform cells on ``[u_min, u_max]``; centers at ``u_min + (i+1/2)*du``."""
    if not (math.isfinite(u_min) and math.isfinite(u_max) and 0 <= u_min < u_max):
        raise ValidationError(f"need 0 <= u_min < u_max, got [{u_min}, {u_max}]")
    if int(M) != M or M < 2:
        raise ValidationError(f"cell count M must be an integer >= 2, got {M}")
    M = int(M)
    du = (u_max - u_min) / M
    points = u_min + (np.arange(M) + 0.5) * du
    return StateGrid(points=points, cell_width=du, u_min=u_min, u_max=u_max)


def default_grid(K_guess: float, M: int = DEFAULT_CELLS) -> StateGrid:
    """Grid covering [0, 2*K_guess]: the logistic state lives in [0, K]
    plus noise excursions, so twice the guess covers overshoot."""
    if K_guess <= 0:
        raise ValidationError(f"K guess must be > 0, got {K_guess}")
    return build_grid(0.0, 2.0 * K_guess, M)


def needs_rebuild(grid: StateGrid, K_hat: float) -> bool:
    """True when a K estimate has left the middle half of the grid span."""
    return not (REBUILD_LO * grid.u_max <= K_hat <= REBUILD_HI * grid.u_max)


def quantize(grid: StateGrid, u: float) -> int:
    """0-based index of the cell containing ``u``; out-of-range clips."""
    if not math.isfinite(u):
        raise ValidationError(f"cannot quantize non-finite value {u}")
    idx = int(math.floor((u - grid.u_min) / grid.cell_width))
    return min(max(idx, 0), grid.M - 1)


def transition_matrix(lam: Lambda, grid: StateGrid, h: float) -> TransitionModel:
    """Gaussian step kernel between cell centers, row-normalized.

    Entry (i, j) is the state-noise density of center ``m_j`` around the
    deterministic step from ``m_i``, times the cell width, with each row
    renormalized to sum to exactly one.

    Raises
    ------
    GridCoverageError
        If a row sums to zero before normalization (the predicted mean
        fell so far outside the grid that every density underflowed).
    """
    m = grid.points
    means = np.asarray(logistic_step(m, lam.r, lam.K, h), dtype=float).reshape(-1)
    z = (m[None, :] - means[:, None]) / lam.sigma
    dens = np.exp(-0.5 * z * z) / (lam.sigma * _SQRT_2PI)
    raw = dens * grid.cell_width
    row_sums = raw.sum(axis=1)
    dead = np.where(row_sums <= 0.0)[0]
    if dead.size:
        i = int(dead[0])
        raise GridCoverageError(cell=i, center=m[i], mean=means[i])
    return TransitionModel(matrix=raw / row_sums[:, None])


def emission_weights(
    lam: Lambda, grid: StateGrid, y: float, step: int | None = None
) -> np.ndarray:
    """Observation-noise density of ``y`` around ``a*m_i + b`` per cell.

    Unnormalized densities (no cell-width factor).  Raises
    :class:`EmissionUnderflowError` if every entry underflows to zero;
    ``step`` is only used to label that error.
    """
    if not math.isfinite(y):
        raise ValidationError(f"observation must be finite, got {y}")
    resid = (y - lam.a * grid.points - lam.b) / lam.tau
    e = np.exp(-0.5 * resid * resid) / (lam.tau * _SQRT_2PI)
    if not np.any(e > 0.0):
        raise EmissionUnderflowError(step=step)
    return e


def emission_matrix(lam: Lambda, grid: StateGrid, ys) -> np.ndarray:
    """Stacked emission weights, shape (N, M); errors carry the time index."""
    ys = np.asarray(ys, dtype=float)
    if ys.ndim != 1 or len(ys) < 1:
        raise ValidationError("need a 1-D, nonempty observation sequence")
    if not np.isfinite(ys).all():
        raise ValidationError("observations must be finite")
    resid = (ys[:, None] - lam.a * grid.points[None, :] - lam.b) / lam.tau
    E = np.exp(-0.5 * resid * resid) / (lam.tau * _SQRT_2PI)
    dead = np.where(~(E > 0.0).any(axis=1))[0]
    if dead.size:
        raise EmissionUnderflowError(step=int(dead[0]))
    return E


def initial_prior(grid: StateGrid, prior="uniform") -> InitialPrior:
    """Build the first-state prior: ``"uniform"`` or a number for a
    point mass on the cell containing that population value."""
    if isinstance(prior, str):
        if prior != "uniform":
            raise ValidationError(f"unknown prior mode {prior!r}")
        w = np.full(grid.M, 1.0 / grid.M)
    else:
        u0 = float(prior)
        w = np.zeros(grid.M)
        w[quantize(grid, u0)] = 1.0
    return InitialPrior(weights=w)
