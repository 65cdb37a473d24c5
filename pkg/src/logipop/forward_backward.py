"""Scaled forward-backward recursions and smoothing posteriors.

Works in the scaled linear domain: each forward step is renormalized and
the per-step factors ``c[t]`` are kept so that the log-likelihood is
``-sum(log(c))``.  The products that assemble the pairwise posteriors then
stay branch-free, and a scaling-invariance property test guards the
bookkeeping.

Time convention: the hidden chain is the N observed states.  ``prior`` is
the distribution of the first of them, so there is no transition factor
ahead of the first emission; ``gamma`` has one row per observation and
``xi[t]`` pairs states ``(t, t+1)`` (N-1 slices).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnderflowError, ValidationError
from .grid import InitialPrior, TransitionModel


@dataclass(frozen=True)
class FBResult:
    """Smoothing output of one forward-backward pass.

    loglik
        Natural log of the observation likelihood under the emission
        density convention of the grid module (``-sum(log(scale))``).
    gamma
        (N, M) state posteriors; rows sum to 1.
    xi
        (N-1, M, M) pairwise posteriors; ``xi[t]`` pairs hidden states
        ``t`` and ``t+1`` and each slice sums to 1.
    scale
        (N,) per-step scaling factors ``c[t]`` (reciprocal normalizers).
    """

    loglik: float
    gamma: np.ndarray
    xi: np.ndarray
    scale: np.ndarray


def _as_matrix(T) -> np.ndarray:
    return T.matrix if isinstance(T, TransitionModel) else np.asarray(T, dtype=float)


def _as_weights(prior) -> np.ndarray:
    if isinstance(prior, InitialPrior):
        return prior.weights
    return np.asarray(prior, dtype=float)


def _check_shapes(T: np.ndarray, emissions: np.ndarray, pi: np.ndarray) -> None:
    if emissions.ndim != 2 or emissions.shape[0] < 1:
        raise ValidationError("emissions must be a nonempty (N, M) matrix")
    M = emissions.shape[1]
    if T.shape != (M, M):
        raise ValidationError(f"transition matrix shape {T.shape} != ({M}, {M})")
    if pi.shape != (M,):
        raise ValidationError(f"prior shape {pi.shape} != ({M},)")


def forward(T, emissions, prior):
    """Scaled alpha recursion.

    Returns ``(alphas, scale, loglik)`` where every ``alphas[t]`` row sums
    to 1, ``scale[t]`` is the reciprocal of the step-t normalizer, and
    ``loglik = -sum(log(scale))``.

    Raises
    ------
    UnderflowError
        If the normalizer at some step is zero (all mass vanished); the
        error carries that step index.
    """
    Tm = _as_matrix(T)
    E = np.asarray(emissions, dtype=float)
    pi = _as_weights(prior)
    _check_shapes(Tm, E, pi)

    N, M = E.shape
    alphas = np.empty((N, M))
    scale = np.empty(N)
    loglik = 0.0
    current = pi
    for t in range(N):
        if t > 0:
            current = alphas[t - 1] @ Tm
        tilde = current * E[t]
        s = tilde.sum()
        if not (s > 0.0 and np.isfinite(s)):
            raise UnderflowError(step=t)
        alphas[t] = tilde / s
        scale[t] = 1.0 / s
        loglik += np.log(s)
    return alphas, scale, float(loglik)


def backward(T, emissions, scale):
    """Scaled beta recursion matching the factors produced by :func:`forward`.

    The last row is all ones; earlier rows satisfy
    ``betas[t] = scale[t+1] * T @ (emissions[t+1] * betas[t+1])``.
    """
    Tm = _as_matrix(T)
    E = np.asarray(emissions, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if E.shape[0] != scale.shape[0]:
        raise ValidationError("scale length must match the number of observations")

    N, M = E.shape
    betas = np.empty((N, M))
    betas[N - 1] = 1.0
    for t in range(N - 2, -1, -1):
        betas[t] = scale[t + 1] * (Tm @ (E[t + 1] * betas[t + 1]))
    return betas


def posteriors(T, emissions, prior) -> FBResult:
    """Full smoothing pass: gamma, xi, and the log-likelihood.

    ``gamma[t] ~ alphas[t] * betas[t]`` and
    ``xi[t][i][j] ~ alphas[t][i] * T[i][j] * emissions[t+1][j] * betas[t+1][j]``,
    each renormalized to sum to one.
    """
    Tm = _as_matrix(T)
    E = np.asarray(emissions, dtype=float)
    pi = _as_weights(prior)

    alphas, scale, loglik = forward(Tm, E, pi)
    betas = backward(Tm, E, scale)

    gamma = alphas * betas
    gamma /= gamma.sum(axis=1, keepdims=True)

    N, M = E.shape
    xi = np.einsum(
        "ti,ij,tj->tij", alphas[:-1], Tm, E[1:] * betas[1:], optimize=True
    )
    if N > 1:
        xi /= xi.sum(axis=(1, 2), keepdims=True)
    else:
        xi = xi.reshape(0, M, M)
    return FBResult(loglik=loglik, gamma=gamma, xi=xi, scale=scale)
