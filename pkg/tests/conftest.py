import numpy as np
import pytest

from logipop import Lambda, build_grid


#: Canonical synthetic truth used across integration-style tests.
TRUE_LAMBDA = Lambda(r=0.8, K=100.0, a=2.0, b=5.0, sigma=1.0, tau=0.5)


@pytest.fixture
def true_lambda():
    return TRUE_LAMBDA


def random_hmm_instance(rng, N, M):
    """Random row-stochastic transition, positive emissions, random prior.

    Emissions span a few orders of magnitude so scaling bookkeeping is
    actually exercised.
    """
    T = rng.uniform(0.1, 1.0, size=(M, M))
    T /= T.sum(axis=1, keepdims=True)
    E = np.exp(rng.uniform(-3.0, 3.0, size=(N, M)))
    pi = rng.uniform(0.1, 1.0, size=M)
    pi /= pi.sum()
    return T, E, pi


def random_lambda(rng):
    """Admissible random parameter vector at ecological scale."""
    return Lambda(
        r=rng.uniform(0.2, 1.5),
        K=rng.uniform(40.0, 160.0),
        a=rng.uniform(0.5, 3.0),
        b=rng.uniform(-5.0, 10.0),
        sigma=rng.uniform(0.5, 3.0),
        tau=rng.uniform(0.2, 2.0),
    )


def perturbed(lam, rng, rel):
    """Multiply every component by an independent factor in [1-rel, 1+rel]."""
    factors = rng.uniform(1.0 - rel, 1.0 + rel, size=6)
    vals = lam.as_array() * factors
    return Lambda.from_array(vals)


def make_grid_for(lam, M=64):
    return build_grid(0.0, 2.0 * lam.K, M)


def stats_from_path(u, y, lambda_ref, cell_width=1e-3):
    """Sufficient statistics of a fully observed path (degenerate posteriors).

    Hand-computes every moment with plain sums over the path, which is what
    one-hot gamma/xi weights on exact cell centers would produce.  Serves as
    an independent oracle for the re-estimation formulas.
    """
    from logipop import SufficientStats

    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    prev, nxt = u[:-1], u[1:]
    d = nxt - prev
    return SufficientStats(
        w_pair=float(len(prev)),
        p10=float(prev.sum()),
        p20=float((prev**2).sum()),
        p30=float((prev**3).sum()),
        p40=float((prev**4).sum()),
        p01=float(d.sum()),
        p11=float((prev * d).sum()),
        p21=float((prev**2 * d).sum()),
        p02=float((d**2).sum()),
        n_obs=float(len(y)),
        su=float(u[1:].sum()) if len(u) == len(y) + 1 else float(u.sum()),
        suu=float((u[1:] ** 2).sum()) if len(u) == len(y) + 1 else float((u**2).sum()),
        sy=float(y.sum()),
        syy=float((y**2).sum()),
        suy=float((u[1:] * y).sum()) if len(u) == len(y) + 1 else float((u * y).sum()),
        cell_width=cell_width,
        lambda_ref=lambda_ref,
    )
