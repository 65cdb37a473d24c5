"""Grid construction, quantization, and the HMM kernels."""

import numpy as np
import pytest

from logipop import (
    EmissionUnderflowError,
    GridCoverageError,
    InitialPrior,
    Lambda,
    StateGrid,
    TransitionModel,
    ValidationError,
    build_grid,
    default_grid,
    emission_matrix,
    emission_weights,
    initial_prior,
    logistic_step,
    needs_rebuild,
    quantize,
    transition_matrix,
)
from conftest import random_lambda

SQRT_2PI = np.sqrt(2.0 * np.pi)


def single_cell_grid(center=50.0, width=100.0):
    return StateGrid(
        points=np.array([center]),
        cell_width=width,
        u_min=center - width / 2,
        u_max=center + width / 2,
    )


class TestBuildGrid:
    def test_two_cells(self):
        g = build_grid(0.0, 10.0, 2)
        np.testing.assert_allclose(g.points, [2.5, 7.5])
        assert g.cell_width == 5.0

    def test_unit_cells(self):
        g = build_grid(0.0, 100.0, 100)
        assert g.cell_width == 1.0
        assert g.points[0] == 0.5
        assert g.points[-1] == 99.5

    def test_quantize_roundtrip_on_centers(self):
        g = build_grid(0.0, 200.0, 64)
        assert g.M == 64
        for i, m in enumerate(g.points):
            assert quantize(g, m) == i

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValidationError):
            build_grid(-1.0, 10.0, 4)
        with pytest.raises(ValidationError):
            build_grid(5.0, 5.0, 4)
        with pytest.raises(ValidationError):
            build_grid(0.0, 10.0, 1)

    def test_default_grid_spans_twice_the_guess(self):
        g = default_grid(100.0)
        assert g.u_min == 0.0 and g.u_max == 200.0 and g.M == 64

    def test_rebuild_threshold_is_middle_half(self):
        g = build_grid(0.0, 200.0, 32)
        assert not needs_rebuild(g, 50.0)
        assert not needs_rebuild(g, 150.0)
        assert needs_rebuild(g, 49.0)
        assert needs_rebuild(g, 151.0)


class TestQuantize:
    def test_interior(self):
        g = build_grid(0.0, 10.0, 2)
        assert quantize(g, 1.0) == 0

    def test_clips_below(self):
        g = build_grid(0.0, 10.0, 2)
        assert quantize(g, -3.0) == 0

    def test_clips_at_upper_boundary(self):
        g = build_grid(0.0, 10.0, 2)
        assert quantize(g, 10.0) == 1

    def test_rejects_nonfinite(self):
        g = build_grid(0.0, 10.0, 2)
        with pytest.raises(ValidationError):
            quantize(g, float("nan"))


class TestTransitionMatrix:
    def test_single_cell_is_identity(self, true_lambda):
        T = transition_matrix(true_lambda, single_cell_grid(), h=0.05)
        np.testing.assert_array_equal(T.matrix, [[1.0]])

    @pytest.mark.parametrize("seed", range(8))
    def test_rows_stochastic_for_random_models(self, seed):
        rng = np.random.default_rng(seed)
        lam = random_lambda(rng)
        g = build_grid(0.0, rng.uniform(1.5, 3.0) * lam.K, int(rng.integers(4, 48)))
        T = transition_matrix(lam, g, h=0.05).matrix
        assert np.all(T >= 0.0)
        np.testing.assert_allclose(T.sum(axis=1), 1.0, atol=1e-12)

    def test_huge_sigma_gives_uniform_rows(self, true_lambda):
        g = build_grid(0.0, 200.0, 8)
        lam = true_lambda.replace(sigma=100.0 * (g.u_max - g.u_min))
        T = transition_matrix(lam, g, h=0.05).matrix
        assert np.max(np.abs(T - 1.0 / g.M)) <= 1e-3

    def test_row_argmax_tracks_deterministic_step(self, true_lambda):
        g = build_grid(0.0, 200.0, 64)
        T = transition_matrix(true_lambda, g, h=0.05).matrix
        for i, m in enumerate(g.points):
            j = quantize(g, logistic_step(m, true_lambda.r, true_lambda.K, 0.05))
            if 0 < j < g.M - 1:
                assert np.argmax(T[i]) == j

    def test_independent_of_observation_parameters(self, true_lambda):
        g = build_grid(0.0, 200.0, 16)
        T1 = transition_matrix(true_lambda, g, h=0.05).matrix
        T2 = transition_matrix(
            true_lambda.replace(a=9.0, b=-4.0, tau=3.0), g, h=0.05
        ).matrix
        np.testing.assert_array_equal(T1, T2)

    def test_uncovered_row_raises_with_cell(self):
        # huge growth throws the predicted mean far beyond the grid while
        # sigma is far too small to reach back
        lam = Lambda(r=1e6, K=1e9, a=1.0, b=0.0, sigma=1e-3, tau=1.0)
        g = build_grid(0.0, 10.0, 4)
        with pytest.raises(GridCoverageError) as err:
            transition_matrix(lam, g, h=1.0)
        assert 0 <= err.value.cell < 4


class TestEmissionWeights:
    def test_peak_value_at_exact_mean(self, true_lambda):
        g = build_grid(0.0, 100.0, 4)
        i = 2
        y = true_lambda.a * g.points[i] + true_lambda.b
        e = emission_weights(true_lambda, g, y)
        assert np.argmax(e) == i
        assert e[i] == pytest.approx(1.0 / (true_lambda.tau * SQRT_2PI))

    def test_zero_gain_is_uninformative(self, true_lambda):
        g = build_grid(0.0, 100.0, 8)
        lam = true_lambda.replace(a=0.0)
        e = emission_weights(lam, g, y=5.0)
        assert np.all(e == e[0])

    def test_argmax_matches_generating_cell(self):
        lam = Lambda(r=0.8, K=100.0, a=2.0, b=5.0, sigma=1.0, tau=0.5)
        g = build_grid(0.0, 100.0, 4)
        y = lam.a * g.points[1] + lam.b
        assert np.argmax(emission_weights(lam, g, y)) == 1

    def test_underflow_names_time_index(self, true_lambda):
        g = build_grid(0.0, 10.0, 4)
        lam = true_lambda.replace(tau=1e-6)
        ys = np.array([lam.a * g.points[0] + lam.b, 1e9])
        with pytest.raises(EmissionUnderflowError) as err:
            emission_matrix(lam, g, ys)
        assert err.value.step == 1

    def test_matrix_matches_stacked_vectors(self, true_lambda):
        g = build_grid(0.0, 150.0, 12)
        ys = np.array([10.0, 80.0, 200.0])
        E = emission_matrix(true_lambda, g, ys)
        for t, y in enumerate(ys):
            np.testing.assert_array_equal(E[t], emission_weights(true_lambda, g, y))


class TestInitialPrior:
    def test_uniform(self):
        g = build_grid(0.0, 100.0, 4)
        np.testing.assert_array_equal(
            initial_prior(g, "uniform").weights, [0.25, 0.25, 0.25, 0.25]
        )

    def test_delta_low_cell(self):
        g = build_grid(0.0, 10.0, 2)
        np.testing.assert_array_equal(initial_prior(g, 1.0).weights, [1.0, 0.0])

    def test_delta_high_cell(self):
        g = build_grid(0.0, 10.0, 2)
        np.testing.assert_array_equal(initial_prior(g, 9.0).weights, [0.0, 1.0])

    def test_unknown_mode_rejected(self):
        g = build_grid(0.0, 10.0, 2)
        with pytest.raises(ValidationError):
            initial_prior(g, "gaussian")


class TestTypeValidation:
    def test_grid_rejects_nonuniform_spacing(self):
        with pytest.raises(ValidationError):
            StateGrid(
                points=np.array([1.0, 2.0, 4.0]),
                cell_width=1.0, u_min=0.0, u_max=5.0,
            )

    def test_prior_must_normalize(self):
        with pytest.raises(ValidationError):
            InitialPrior(weights=np.array([0.5, 0.6]))
        with pytest.raises(ValidationError):
            InitialPrior(weights=np.array([-0.1, 1.1]))

    def test_transition_rows_must_normalize(self):
        with pytest.raises(ValidationError):
            TransitionModel(matrix=np.array([[0.5, 0.6], [0.5, 0.5]]))
