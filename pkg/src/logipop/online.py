"""Online adaptive recursive estimator (ARE).

Consumes observations one at a time.  Each step forms the one-step
filtered pairwise weight

    W[i][j] ~ filter[i] * T(lam)[i][j] * e(y, lam)[j],   normalized,

computes the same per-observation statistics that drive the batch
updates (single-step sums, previous-step parameter values), and blends
them into the estimate as a convex combination

    lam[n] = (1 - eps[n]) * lam[n-1] + eps[n] * S[n]

in the coordinates (r, 1/K, a, b, sigma^2, tau^2), where the recursion
is affine.  The raw per-step likelihood weights grow or shrink
exponentially with n, but every statistic is a ratio in which the common
history factor cancels, so the normalized filtered weights give the
identical values with bounded arithmetic.  Cost per observation is
O(M^2); the filter is never re-smoothed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import UnderflowError, ValidationError
from .grid import InitialPrior, StateGrid, emission_weights, initial_prior, transition_matrix
from .model import SIGMA_FLOOR, TAU_FLOOR, Lambda, logistic_step
from .offline import FitReport, IterateRecord

logger = logging.getLogger(__name__)

#: A per-step statistic whose denominator is at or below this threshold
#: leaves its component unchanged for the step (skip event).
SKIP_DENOMINATOR = 1e-30

#: Ceiling for K when the 1/K recursion dips to zero or below.
K_CEILING = 1e12

PARAM_NAMES = ("r", "K", "a", "b", "sigma", "tau")


@dataclass(frozen=True)
class StepSchedule:
    """Gain sequence eps[n] for the recursive updates.

    Kinds: ``inverse-n`` (1/n), ``bertrand`` (1/(n*(ln n)^k) from n0 on,
    1 before), ``constant``.  Values are always clipped to (0, 1].  The
    bertrand series diverges only for k = 1, which is the default; k > 1
    is accepted because the source derivation suggests it, but the gain
    sum then converges and the estimate can freeze early.
    """

    kind: str
    k: float = 1.0
    eps: float | None = None
    n0: int = 2

    def __post_init__(self):
        if self.kind not in ("inverse-n", "bertrand", "constant"):
            raise ValidationError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "constant":
            if self.eps is None or not (0.0 < self.eps <= 1.0):
                raise ValidationError(
                    f"constant schedule needs eps in (0, 1], got {self.eps}"
                )
        if self.kind == "bertrand":
            if self.k < 1.0:
                raise ValidationError(f"bertrand exponent k must be >= 1, got {self.k}")
            if self.n0 < 2:
                raise ValidationError(f"bertrand start index n0 must be >= 2, got {self.n0}")

    @classmethod
    def inverse_n(cls) -> "StepSchedule":
        return cls(kind="inverse-n")

    @classmethod
    def bertrand(cls, k: float = 1.0, n0: int = 2) -> "StepSchedule":
        return cls(kind="bertrand", k=k, n0=n0)

    @classmethod
    def constant(cls, eps: float) -> "StepSchedule":
        return cls(kind="constant", eps=eps)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "bertrand":
            d["k"] = self.k
            d["n0"] = self.n0
        if self.kind == "constant":
            d["eps"] = self.eps
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StepSchedule":
        kind = d.get("kind")
        if kind == "bertrand":
            return cls.bertrand(k=float(d.get("k", 1.0)), n0=int(d.get("n0", 2)))
        if kind == "constant":
            return cls.constant(eps=float(d["eps"]))
        if kind == "inverse-n":
            return cls.inverse_n()
        raise ValidationError(f"unknown schedule kind {kind!r}")


def epsilon(schedule: StepSchedule, n: int) -> float:
    """Gain at step n >= 1, clipped to (0, 1]."""
    if n < 1:
        raise ValidationError(f"step index must be >= 1, got {n}")
    if schedule.kind == "inverse-n":
        value = 1.0 / n
    elif schedule.kind == "constant":
        value = schedule.eps
    else:  # bertrand
        value = 1.0 if n < schedule.n0 else 1.0 / (n * math.log(n) ** schedule.k)
    return min(max(value, np.finfo(float).tiny), 1.0)


# ---------------------------------------------------------------------------
# Recursion coordinates
# ---------------------------------------------------------------------------


def lambda_to_coords(lam: Lambda) -> np.ndarray:
    """(r, 1/K, a, b, sigma^2, tau^2): the coordinates in which every
    update is an affine combination."""
    return np.array(
        [lam.r, 1.0 / lam.K, lam.a, lam.b, lam.sigma**2, lam.tau**2]
    )


def coords_to_lambda(coords: np.ndarray, k_floor: float) -> Lambda:
    """Back to a valid parameter vector, applying all floors."""
    r, kinv, a, b, sigma2, tau2 = (float(v) for v in coords)
    kinv = min(max(kinv, 1.0 / K_CEILING), 1.0 / k_floor)
    sigma = max(math.sqrt(max(sigma2, 0.0)), SIGMA_FLOOR)
    tau = max(math.sqrt(max(tau2, 0.0)), TAU_FLOOR)
    return Lambda(r=r, K=1.0 / kinv, a=a, b=b, sigma=sigma, tau=tau)


def convex_update(prev: np.ndarray, stat: np.ndarray, eps: float) -> np.ndarray:
    """(1 - eps)*prev + eps*stat, componentwise."""
    return (1.0 - eps) * np.asarray(prev, float) + eps * np.asarray(stat, float)


def step_statistics(
    W: np.ndarray, points: np.ndarray, y: float, lam_prev: Lambda, h: float
):
    """Per-step statistics S[n] from a normalized pairwise weight matrix.

    Returns ``(stats, skipped)`` in recursion coordinates; components
    whose denominator is at most :data:`SKIP_DENOMINATOR` come back as
    NaN with their name in ``skipped``.  Separated from the filtering so
    tests can inject weight matrices directly.
    """
    m = np.asarray(points, dtype=float)
    row = W.sum(axis=1)
    col = W.sum(axis=0)
    Wm = W @ m  # (M,): sum_j W[i][j]*m_j

    r_prev, K_prev = lam_prev.r, lam_prev.K
    g = m * (1.0 - m / K_prev)
    f = logistic_step(m, r_prev, K_prev, h)

    stats = np.full(6, np.nan)
    skipped = []

    # r:  sum W g_i d / (h sum W g_i^2)
    r_den = h * float(row @ (g * g))
    if r_den > SKIP_DENOMINATOR:
        stats[0] = (float(g @ Wm) - float(row @ (g * m))) / r_den
    else:
        skipped.append("r")

    # 1/K:  -sum W (d - h r m_i) / (h r sum W m_i^2)
    k_den = h * r_prev * float(row @ (m * m))
    if abs(k_den) > SKIP_DENOMINATOR:
        num = float(col @ m) - float(row @ m) - h * r_prev * float(row @ m)
        stats[1] = -num / k_den
    else:
        skipped.append("K")

    # a:  sum col (y - b) m / sum col m^2
    a_den = float(col @ (m * m))
    if a_den > SKIP_DENOMINATOR:
        stats[2] = (y - lam_prev.b) * float(col @ m) / a_den
    else:
        skipped.append("a")

    # b:  sum col (y - a m)   (denominator is the unit total weight)
    stats[3] = y - lam_prev.a * float(col @ m)

    # sigma^2:  sum W (m_j - f_i)^2
    stats[4] = float(col @ (m * m)) - 2.0 * float(f @ Wm) + float(row @ (f * f))

    # tau^2:  sum col (y - a m - b)^2
    resid = y - lam_prev.a * m - lam_prev.b
    stats[5] = float(col @ (resid * resid))

    return stats, skipped


@dataclass(frozen=True)
class AREState:
    """Rolling state of the online estimator.

    ``filter`` is the filtered posterior of the current hidden state
    under the time-varying parameter history; ``prev_filter`` is the one
    from the previous step.  ``loglik`` accumulates the per-step
    predictive log-likelihood (the log of each step's weight normalizer).
    """

    n: int
    lam: Lambda
    grid: StateGrid
    filter: np.ndarray
    prev_filter: np.ndarray
    loglik: float = 0.0
    skips: dict | None = None

    def __post_init__(self):
        f = np.asarray(self.filter, dtype=float)
        object.__setattr__(self, "filter", f)
        if np.any(f < 0) or abs(f.sum() - 1.0) > 1e-9:
            raise ValidationError("filter must be a probability vector")
        if self.skips is None:
            object.__setattr__(self, "skips", {name: 0 for name in PARAM_NAMES})


def are_init(lambda0: Lambda, grid: StateGrid, prior="uniform") -> AREState:
    """Fresh state at n=0 with the filter set to the prior."""
    if not isinstance(lambda0, Lambda):
        raise ValidationError("lambda0 must be a Lambda instance")
    pi = prior if isinstance(prior, InitialPrior) else initial_prior(grid, prior)
    if len(pi.weights) != grid.M:
        raise ValidationError("prior length does not match the grid")
    return AREState(
        n=0, lam=lambda0, grid=grid,
        filter=pi.weights.copy(), prev_filter=pi.weights.copy(),
    )


def are_step(state: AREState, y: float, schedule: StepSchedule, h: float) -> AREState:
    """Absorb one observation: reweight, update parameters, advance filter.

    Component updates whose statistic denominator is degenerate are
    skipped for the step (the component keeps its previous value) and
    counted in ``skips``; online estimation has to survive transient
    unidentifiability, e.g. the state hovering at the carrying capacity
    makes the r statistic degenerate.

    Raises
    ------
    UnderflowError
        If the step's weight normalizer vanishes, same contract as the
        forward pass.
    """
    if not math.isfinite(y):
        raise ValidationError(f"observation must be finite, got {y}")
    lam = state.lam
    grid = state.grid
    n = state.n + 1

    T = transition_matrix(lam, grid, h).matrix
    e = emission_weights(lam, grid, y, step=n)
    W = state.filter[:, None] * T * e[None, :]
    Z = W.sum()
    if not (Z > 0.0 and np.isfinite(Z)):
        raise UnderflowError(step=n)
    W /= Z

    stats, skipped = step_statistics(W, grid.points, y, lam, h)
    eps = epsilon(schedule, n)
    prev = lambda_to_coords(lam)
    nxt = convex_update(prev, stats, eps)
    if skipped:
        idx = [PARAM_NAMES.index(p) for p in skipped]
        nxt[idx] = prev[idx]
        logger.info("step %d: skipped update for %s (degenerate denominator)",
                    n, ",".join(skipped))
    skips = dict(state.skips)
    for p in skipped:
        skips[p] += 1

    lam_new = coords_to_lambda(nxt, k_floor=grid.cell_width)
    new_filter = W.sum(axis=0)
    new_filter /= new_filter.sum()
    return AREState(
        n=n, lam=lam_new, grid=grid,
        filter=new_filter, prev_filter=state.filter,
        loglik=state.loglik + float(np.log(Z)), skips=skips,
    )


def fit_are(
    stream,
    lambda0: Lambda,
    grid: StateGrid,
    schedule: StepSchedule,
    h: float,
    prior="uniform",
    stride: int = 100,
) -> FitReport:
    """Drive :func:`are_step` over an observation stream.

    Records the estimate at n=0, every ``stride`` steps, and at the end
    of the stream.  Errors keep the history recorded so far and set
    ``stop_reason="error"``.
    """
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {stride}")
    state = are_init(lambda0, grid, prior)
    iterates = [IterateRecord(0, lambda0, 0.0)]
    stop_reason = "end-of-stream"
    converged = True
    error = None
    try:
        for y in stream:
            state = are_step(state, float(y), schedule, h)
            if state.n % stride == 0:
                iterates.append(IterateRecord(state.n, state.lam, state.loglik))
    except (UnderflowError, ValidationError) as exc:
        stop_reason = "error"
        converged = False
        error = str(exc)
        logger.warning("online fit aborted at step %d: %s", state.n + 1, exc)
    if state.n == 0 and error is None:
        raise ValidationError("observation stream is empty")
    if iterates[-1].iteration != state.n:
        iterates.append(IterateRecord(state.n, state.lam, state.loglik))
    return FitReport(
        variant=None,
        iterates=tuple(iterates),
        converged=converged,
        stop_reason=stop_reason,
        error=error,
        schedule=schedule.to_dict(),
        skips=dict(state.skips),
    )
