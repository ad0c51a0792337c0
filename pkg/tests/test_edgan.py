import numpy as np
import pytest
from discgan.base import Exceptions
from discgan.datagen import ModeLimitedSampler, RingSampler, RingSpec
from discgan.edgan import (
    EnsembleInputs,
    MixtureWeights,
    edgan_optimize,
    ensemble_objective,
    generalization_gap,
    grid_search,
    mixture_cov_diff,
    simplex_lattice,
    simplex_project,
    theorem4_probe,
)
from discgan.linalg import ExactSolver

from .utils import random_ball_samples


def random_inputs(seed: int, p: int | None = None) -> EnsembleInputs:
    """Generators that are squashed Gaussians of varying spread, and a real sample in between."""
    rng = np.random.default_rng(seed)
    p = p or int(rng.integers(2, 4))
    d = int(rng.integers(1, 4))
    generators = [
        random_ball_samples(80, d, rng).scaled(float(rng.uniform(0.2, 1.0))) for _ in range(p)
    ]
    return EnsembleInputs(generators, random_ball_samples(100, d, rng).scaled(0.6))


def exact_value(alpha, inputs: EnsembleInputs) -> float:
    return ensemble_objective(alpha, inputs, solver=ExactSolver()).value


class TestSimplexProjection:
    @pytest.mark.parametrize(
        ["v", "expected"],
        [
            ([0.5, 0.5], [0.5, 0.5]),
            ([2.0, 0.0], [1.0, 0.0]),
            ([1.0, 1.0, 1.0], [1 / 3, 1 / 3, 1 / 3]),
            ([-5.0, 0.2], [0.0, 1.0]),
            ([0.3], [1.0]),
        ],
    )
    def test_known_projections(self, v, expected):
        np.testing.assert_allclose(simplex_project(v), expected, atol=1e-15)

    @pytest.mark.parametrize("seed", range(10))
    def test_output_is_the_nearest_simplex_point(self, seed):
        rng = np.random.default_rng(seed)
        v = rng.normal(0, 2, 5)
        x = simplex_project(v)
        assert np.all(x >= 0)
        assert abs(np.sum(x) - 1) <= 1e-12
        others = rng.dirichlet(np.ones(5), 500)
        distances = np.linalg.norm(others - v, axis=1)
        assert np.linalg.norm(x - v) <= np.min(distances) + 1e-12

    @pytest.mark.parametrize(
        ["v", "error"], [([], Exceptions.ParameterError), ([np.nan], Exceptions.NonFiniteValue)]
    )
    def test_invalid_input(self, v, error):
        with pytest.raises(error):
            simplex_project(v)


class TestMixtureWeights:
    def test_uniform(self):
        weights = MixtureWeights.uniform(3)
        assert weights.p == 3
        assert np.sum(weights.alpha) == pytest.approx(1.0, abs=1e-15)
        assert weights.objective is None

    @pytest.mark.parametrize("alpha", [[], [0.5, 0.6], [1.5, -0.5], [np.nan, 1.0]])
    def test_invalid_weights(self, alpha):
        with pytest.raises(Exceptions.ParameterError):
            MixtureWeights(alpha)

    def test_objective_is_the_lowest_traced_value(self):
        assert MixtureWeights([1.0], [(0, 0.3), (1, 0.1), (2, 0.2)]).objective == 0.1


class TestObjective:
    def test_mixture_matrix(self):
        inputs = EnsembleInputs([[[1.0], [-1.0]], [[2.0], [-2.0]]], [[0.0], [3.0]])
        # 0.25 * 1 + 0.75 * 4 - 4.5
        assert mixture_cov_diff([0.25, 0.75], inputs).entries[0, 0] == pytest.approx(-1.25)
        assert exact_value([0.25, 0.75], inputs) == pytest.approx(1.25)

    def test_weight_count_is_checked(self):
        inputs = random_inputs(0, p=2)
        with pytest.raises(Exceptions.DimensionMismatch):
            mixture_cov_diff([1.0], inputs)

    def test_dimension_mismatch(self):
        with pytest.raises(Exceptions.DimensionMismatch):
            EnsembleInputs([[[0.1, 0.2]], [[0.1]]], [[0.3, 0.4]])

    @pytest.mark.parametrize("seed", range(5))
    def test_midpoint_convexity(self, seed):
        inputs = random_inputs(seed)
        rng = np.random.default_rng(seed)
        starts, ends = rng.dirichlet(np.ones(inputs.p), 200), rng.dirichlet(np.ones(inputs.p), 200)
        for a, b in zip(starts, ends):
            middle = exact_value((a + b) / 2, inputs)
            assert middle <= (exact_value(a, inputs) + exact_value(b, inputs)) / 2 + 1e-10


class TestOptimization:
    def test_single_generator(self):
        inputs = random_inputs(1, p=1)
        weights = edgan_optimize(inputs, iters=10)
        np.testing.assert_array_equal(weights.alpha, [1.0])

    @pytest.mark.parametrize("order", [(0, 1), (1, 0)])
    def test_matched_generator_takes_the_weight(self, order):
        rng = np.random.default_rng(3)
        real = random_ball_samples(400, 2, rng)
        collapsed = real.scaled(0.1)
        inputs = EnsembleInputs([real, collapsed], real).permuted(order)
        weights = edgan_optimize(inputs, iters=200, rng=0)
        assert weights.alpha[order.index(0)] >= 0.99

    @pytest.mark.parametrize("seed", range(10))
    def test_close_to_the_grid_minimum(self, seed):
        inputs = random_inputs(seed)
        weights = edgan_optimize(inputs, rng=seed)
        grid = grid_search(inputs, resolution=0.01)
        assert exact_value(weights, inputs) <= grid.value + 1e-3

    @pytest.mark.slow
    def test_close_to_the_grid_minimum_on_many_instances(self):
        for seed in range(100, 150):
            inputs = random_inputs(seed)
            weights = edgan_optimize(inputs, rng=seed)
            assert exact_value(weights, inputs) <= grid_search(inputs).value + 1e-3

    def test_never_worse_than_the_uniform_start(self):
        inputs = random_inputs(7, p=3)
        weights = edgan_optimize(inputs, iters=50, rng=0)
        assert weights.objective <= weights.trace[0][1]
        assert len(weights.trace) == 52

    def test_seeded_runs_agree(self):
        inputs = random_inputs(8)
        first, second = edgan_optimize(inputs, rng=4), edgan_optimize(inputs, rng=4)
        assert np.array_equal(first.alpha, second.alpha)

    @pytest.mark.parametrize("kwargs", [{"iters": 0}, {"eta0": -1.0}])
    def test_invalid_parameters(self, kwargs):
        with pytest.raises(Exceptions.ParameterError):
            edgan_optimize(random_inputs(0, p=2), **kwargs)


class TestGridSearch:
    def test_lattice(self):
        lattice = simplex_lattice(3, 0.5)
        assert len(lattice) == 6
        np.testing.assert_allclose(lattice.sum(axis=1), 1.0)
        assert len(simplex_lattice(3, 0.01)) == 5151

    @pytest.mark.parametrize(
        ["p", "resolution", "error"],
        [(3, 0.3, Exceptions.ParameterError), (8, 0.001, Exceptions.OracleSizeLimit)],
    )
    def test_invalid_lattice(self, p, resolution, error):
        with pytest.raises(error):
            simplex_lattice(p, resolution)

    def test_grid_minimum_is_a_lattice_minimum(self):
        inputs = random_inputs(2, p=2)
        grid = grid_search(inputs, resolution=0.1)
        values = [exact_value(point, inputs) for point in simplex_lattice(2, 0.1)]
        assert grid.value == pytest.approx(min(values), abs=1e-12)


class TestGeneralization:
    def test_gap_on_the_training_set_is_not_negative(self):
        inputs = random_inputs(4, p=2)
        assert generalization_gap(inputs, inputs, iters=200, rng=1) >= -1e-9

    @pytest.mark.slow
    def test_more_training_data_shrinks_the_gap(self):
        spec = RingSpec()
        sets = [(0, 1, 2, 3, 4), (2, 3, 4, 5, 6), (4, 5, 6, 7, 8)]
        generators = [ModeLimitedSampler(spec, modes, bound=spec.bound) for modes in sets]
        real = RingSampler(spec, bound=spec.bound)
        (_, small), (_, large) = theorem4_probe(
            generators, real, [64, 1024], rng=0, eval_size=5000, iters=500
        )
        assert large < small
