"""Discrete logistic population dynamics with affine observation.

The state follows ``u[n+1] = u[n] + h*r*u[n]*(1 - u[n]/K) + v[n]`` and is
observed through ``y[n] = a*u[n] + b + w[n]`` with independent Gaussian
noises of standard deviations ``sigma`` (state) and ``tau`` (observation).
This module holds the parameter vector, the simulator, and the closed-form
continuous solution used as a discretization oracle by tests.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import SimulationDivergedError, ValidationError

#: Lower clamps for the noise standard deviations.  Re-estimation floors
#: variance updates here; the Lambda type rejects anything smaller.
SIGMA_FLOOR = 1e-6
TAU_FLOOR = 1e-6

#: Simulated states beyond this magnitude abort the simulation.
OVERFLOW_BOUND = 1e12


@dataclass(frozen=True)
class Lambda:
    """The six-parameter vector under estimation.

    Parameters
    ----------
    r : float
        Growth rate (1/time).
    K : float
        Carrying capacity (individuals), strictly positive.
    a : float
        Observation gain (dimensionless).
    b : float
        Observation offset (observation units).
    sigma : float
        State-noise standard deviation (individuals), ``>= SIGMA_FLOOR``.
    tau : float
        Observation-noise standard deviation, ``>= TAU_FLOOR``.
    """

    r: float
    K: float
    a: float
    b: float
    sigma: float
    tau: float

    def __post_init__(self):
        values = (self.r, self.K, self.a, self.b, self.sigma, self.tau)
        if not all(math.isfinite(v) for v in values):
            raise ValidationError(f"model parameters must be finite, got {values}")
        if self.K <= 0:
            raise ValidationError(f"carrying capacity K must be > 0, got {self.K}")
        if self.sigma < SIGMA_FLOOR:
            raise ValidationError(
                f"sigma must be >= {SIGMA_FLOOR}, got {self.sigma}"
            )
        if self.tau < TAU_FLOOR:
            raise ValidationError(f"tau must be >= {TAU_FLOOR}, got {self.tau}")

    def as_array(self) -> np.ndarray:
        """Parameters as a vector in the order (r, K, a, b, sigma, tau)."""
        return np.array([self.r, self.K, self.a, self.b, self.sigma, self.tau])

    @classmethod
    def from_array(cls, x) -> "Lambda":
        r, K, a, b, sigma, tau = (float(v) for v in x)
        return cls(r=r, K=K, a=a, b=b, sigma=sigma, tau=tau)

    def replace(self, **changes) -> "Lambda":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "r": self.r, "K": self.K, "a": self.a,
            "b": self.b, "sigma": self.sigma, "tau": self.tau,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Lambda":
        return cls(**{k: float(d[k]) for k in ("r", "K", "a", "b", "sigma", "tau")})


@dataclass(frozen=True)
class SimConfig:
    """Simulation layout: time step, horizon, initial population, seed."""

    h: float
    N: int
    u0: float
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h > 0):
            raise ValidationError(f"time step h must be > 0, got {self.h}")
        if self.N < 1:
            raise ValidationError(f"step count N must be >= 1, got {self.N}")
        if not (math.isfinite(self.u0) and self.u0 >= 0):
            raise ValidationError(f"initial population u0 must be >= 0, got {self.u0}")


@dataclass(frozen=True)
class Trajectory:
    """States ``u[0..N]`` and observations ``y[1..N]`` of one run.

    ``clamp_count`` records how many times additive noise pushed the
    state below zero and it was clamped back (the model itself never
    leaves the nonnegative half-line without noise).
    """

    states: np.ndarray
    observations: np.ndarray
    clamp_count: int = 0

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        obs = np.asarray(self.observations, dtype=float)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "observations", obs)
        if states.ndim != 1 or obs.ndim != 1:
            raise ValidationError("states and observations must be 1-D")
        if len(states) != len(obs) + 1:
            raise ValidationError(
                f"need len(states) == len(observations)+1, got "
                f"{len(states)} and {len(obs)}"
            )
        if len(obs) < 1:
            raise ValidationError("trajectory must contain at least one observation")
        if not (np.isfinite(states).all() and np.isfinite(obs).all()):
            raise ValidationError("trajectory entries must be finite")

    @property
    def N(self) -> int:
        return len(self.observations)


def logistic_step(u, r: float, K: float, h: float):
    """One deterministic step ``u + h*r*u*(1 - u/K)``.

    Accepts scalars or arrays in ``u``.
    """
    if K <= 0:
        raise ValidationError(f"K must be > 0, got {K}")
    if h <= 0:
        raise ValidationError(f"h must be > 0, got {h}")
    u = np.asarray(u, dtype=float)
    if not np.isfinite(u).all():
        raise ValidationError("state input to logistic_step must be finite")
    out = u + h * r * u * (1.0 - u / K)
    return float(out) if out.ndim == 0 else out


def observe(u, a: float, b: float):
    """Affine observation ``a*u + b`` (scalar or array ``u``)."""
    u = np.asarray(u, dtype=float)
    if not (np.isfinite(u).all() and math.isfinite(a) and math.isfinite(b)):
        raise ValidationError("inputs to observe must be finite")
    out = a * u + b
    return float(out) if out.ndim == 0 else out


def simulate(
    lam: Lambda,
    config: SimConfig,
    rng: np.random.Generator | None = None,
    with_noise: bool = True,
) -> Trajectory:
    """Simulate the stochastic model; deterministic given the seed.

    With ``with_noise=False`` the noise terms are skipped entirely and the
    result is bitwise equal to iterating :func:`logistic_step` and
    :func:`observe`.  States are clamped at zero from below; clamping
    events are counted on the returned trajectory.

    Raises
    ------
    SimulationDivergedError
        If any state magnitude exceeds ``OVERFLOW_BOUND``; the error
        carries the offending step index.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    N = config.N
    if with_noise:
        state_noise = rng.normal(0.0, lam.sigma, size=N)
        obs_noise = rng.normal(0.0, lam.tau, size=N)
    else:
        state_noise = obs_noise = None

    states = np.empty(N + 1)
    states[0] = config.u0
    clamps = 0
    for n in range(N):
        nxt = logistic_step(states[n], lam.r, lam.K, config.h)
        if with_noise:
            nxt = nxt + state_noise[n]
        if nxt < 0.0:
            nxt = 0.0
            clamps += 1
        if not math.isfinite(nxt) or abs(nxt) > OVERFLOW_BOUND:
            raise SimulationDivergedError(step=n + 1, value=nxt)
        states[n + 1] = nxt

    observations = observe(states[1:], lam.a, lam.b)
    if with_noise:
        observations = observations + obs_noise
    return Trajectory(states=states, observations=observations, clamp_count=clamps)


def logistic_exact(u0: float, r: float, K: float, t: float) -> float:
    """Closed-form solution of the continuous logistic growth law.

    Evaluated as ``u0*K / (u0 + (K - u0)*exp(-r*t))``, which is
    algebraically the textbook ``K*u0*e^{rt} / (K + u0*(e^{rt}-1))`` but
    stays finite for large ``r*t``.  Used only as a discretization oracle.
    """
    if K <= 0:
        raise ValidationError(f"K must be > 0, got {K}")
    if u0 < 0:
        raise ValidationError(f"u0 must be >= 0, got {u0}")
    if u0 == 0.0:
        return 0.0
    denom = u0 + (K - u0) * math.exp(-r * t)
    return u0 * K / denom


# ---------------------------------------------------------------------------
# Trajectory CSV interface: header n,u,y; row 0 carries u0 with empty y.
# ---------------------------------------------------------------------------

_FMT = "%.16e"  # 17 significant digits: lossless float round-trip


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write ``n,u,y`` rows; row 0 holds u0 with an empty observation."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "u", "y"])
        writer.writerow(["0", _FMT % traj.states[0], ""])
        for n in range(1, traj.N + 1):
            writer.writerow(
                [str(n), _FMT % traj.states[n], _FMT % traj.observations[n - 1]]
            )


def read_trajectory_csv(path) -> Trajectory:
    """Inverse of :func:`write_trajectory_csv`."""
    states = []
    obs = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:3]] != ["n", "u", "y"]:
            raise ValidationError(f"{path}: expected trajectory header 'n,u,y'")
        for row in reader:
            if not row:
                continue
            states.append(float(row[1]))
            if len(row) > 2 and row[2] != "":
                obs.append(float(row[2]))
    if not states:
        raise ValidationError(f"{path}: empty trajectory file")
    return Trajectory(states=np.array(states), observations=np.array(obs))
