"""Scaled recursions against symmetry cases and exhaustive enumeration."""

import numpy as np
import pytest

from logipop import (
    UnderflowError,
    backward,
    brute_force_from_matrices,
    forward,
    posteriors,
)
from conftest import random_hmm_instance


class TestForward:
    def test_single_state_loglik_is_emission_sum(self):
        E = np.array([[0.3], [1.7], [0.02], [5.0]])
        alphas, scale, loglik = forward([[1.0]], E, [1.0])
        assert loglik == pytest.approx(np.log(E).sum())
        np.testing.assert_array_equal(alphas, np.ones((4, 1)))

    def test_symmetric_single_step(self):
        d = 0.37
        T = np.array([[0.6, 0.4], [0.2, 0.8]])
        alphas, scale, loglik = forward(T, [[d, d]], [0.5, 0.5])
        assert loglik == pytest.approx(np.log(d))
        np.testing.assert_allclose(alphas[0], [0.5, 0.5])

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        T, E, pi = random_hmm_instance(rng, N=12, M=5)
        alphas, scale, loglik = forward(T, E, pi)
        np.testing.assert_allclose(alphas.sum(axis=1), 1.0, atol=1e-12)
        assert loglik == pytest.approx(-np.log(scale).sum())

    def test_underflow_carries_step(self):
        T = np.array([[0.5, 0.5], [0.5, 0.5]])
        E = np.array([[1.0, 1.0], [0.0, 0.0], [1.0, 1.0]])
        with pytest.raises(UnderflowError) as err:
            forward(T, E, [0.5, 0.5])
        assert err.value.step == 1

    def test_matches_bruteforce_loglik(self):
        rng = np.random.default_rng(7)
        T, E, pi = random_hmm_instance(rng, N=4, M=3)
        _, _, loglik = forward(T, E, pi)
        oracle_ll, _, _ = brute_force_from_matrices(T, E, pi)
        assert loglik == pytest.approx(oracle_ll, rel=1e-10)


class TestBackward:
    def test_last_row_is_ones(self):
        rng = np.random.default_rng(5)
        T, E, pi = random_hmm_instance(rng, N=6, M=4)
        _, scale, _ = forward(T, E, pi)
        betas = backward(T, E, scale)
        np.testing.assert_array_equal(betas[-1], np.ones(4))

    def test_single_state_all_ones(self):
        E = np.array([[0.3], [1.7], [0.02]])
        _, scale, _ = forward([[1.0]], E, [1.0])
        betas = backward([[1.0]], E, scale)
        np.testing.assert_allclose(betas, 1.0)

    def test_scale_length_checked(self):
        with pytest.raises(Exception):
            backward([[1.0]], np.ones((3, 1)), np.ones(2))


class TestPosteriors:
    def test_single_step_is_bayes_rule(self):
        T = np.array([[0.1, 0.9], [0.7, 0.3]])
        pi = np.array([0.25, 0.75])
        e = np.array([[2.0, 0.5]])
        fb = posteriors(T, e, pi)
        expected = pi * e[0] / (pi * e[0]).sum()
        np.testing.assert_allclose(fb.gamma[0], expected, rtol=1e-13)
        assert fb.xi.shape == (0, 2, 2)

    def test_uninformative_emissions_keep_uniform_posterior(self):
        # doubly stochastic transition + uniform prior + flat emissions
        T = np.array([[0.7, 0.2, 0.1], [0.1, 0.7, 0.2], [0.2, 0.1, 0.7]])
        E = np.full((6, 3), 0.4)
        fb = posteriors(T, E, np.full(3, 1.0 / 3.0))
        np.testing.assert_allclose(fb.gamma, 1.0 / 3.0, atol=1e-12)

    @pytest.mark.parametrize("seed,N,M", [(7, 4, 3), (11, 5, 4), (2, 6, 2)])
    def test_matches_bruteforce(self, seed, N, M):
        rng = np.random.default_rng(seed)
        T, E, pi = random_hmm_instance(rng, N, M)
        fb = posteriors(T, E, pi)
        oracle_ll, oracle_gamma, oracle_xi = brute_force_from_matrices(T, E, pi)
        assert fb.loglik == pytest.approx(oracle_ll, rel=1e-10)
        np.testing.assert_allclose(fb.gamma, oracle_gamma, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(fb.xi, oracle_xi, rtol=1e-10, atol=1e-12)

    @pytest.mark.parametrize("seed", range(6))
    def test_marginal_consistency(self, seed):
        rng = np.random.default_rng(seed)
        T, E, pi = random_hmm_instance(rng, N=9, M=4)
        fb = posteriors(T, E, pi)
        np.testing.assert_allclose(fb.gamma.sum(axis=1), 1.0, atol=1e-9)
        np.testing.assert_allclose(
            fb.xi.sum(axis=(1, 2)), 1.0, atol=1e-9
        )
        np.testing.assert_allclose(fb.xi.sum(axis=2), fb.gamma[:-1], atol=1e-9)
        np.testing.assert_allclose(fb.xi.sum(axis=1), fb.gamma[1:], atol=1e-9)

    @pytest.mark.parametrize("c", [1e-5, 1.0, 1e5])
    def test_scaling_one_step_shifts_loglik_only(self, c):
        rng = np.random.default_rng(13)
        T, E, pi = random_hmm_instance(rng, N=8, M=3)
        fb = posteriors(T, E, pi)
        E2 = E.copy()
        E2[4] *= c
        fb2 = posteriors(T, E2, pi)
        assert fb2.loglik - fb.loglik == pytest.approx(np.log(c), abs=1e-9)
        np.testing.assert_allclose(fb2.gamma, fb.gamma, atol=1e-12)
        np.testing.assert_allclose(fb2.xi, fb.xi, atol=1e-12)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(21)
        T, E, pi = random_hmm_instance(rng, N=7, M=4)
        perm = rng.permutation(4)
        fb = posteriors(T, E, pi)
        fb_p = posteriors(T[np.ix_(perm, perm)], E[:, perm], pi[perm])
        assert fb_p.loglik == pytest.approx(fb.loglik, rel=1e-12)
        np.testing.assert_allclose(fb_p.gamma, fb.gamma[:, perm], atol=1e-12)
        np.testing.assert_allclose(
            fb_p.xi, fb.xi[:, perm][:, :, perm], atol=1e-12
        )
