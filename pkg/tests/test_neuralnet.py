import json

import numpy as np
import pytest
from discgan.base import Exceptions
from discgan.neuralnet import (
    GradBuffer,
    Layer,
    MlpParams,
    OptimizerState,
    apply_update,
    backward,
    clip_weights,
    forward,
    init_embedding,
    init_generator,
    init_mlp,
    load_checkpoint,
    params_from_dict,
    save_checkpoint,
)

from .utils import scalar_net


def scaled_network(seed: int, factor: float = 3.0) -> MlpParams:
    """A network whose last layer often pushes rows outside the unit ball."""
    params = init_mlp([3, 5, 4, 2], ["tanh", "relu", "ball"], np.random.default_rng(seed))
    return params.unflatten(params.flatten() * factor)


def weighted_output(params: MlpParams, inputs, cotangent) -> float:
    outputs, _ = forward(params, inputs)
    return float(np.sum(outputs * cotangent))


class TestLayers:
    def test_known_output(self):
        layer = Layer([[1.0, 2.0], [0.0, -1.0]], [0.5, 0.0], "identity")
        outputs, _ = forward(MlpParams([layer]), [[1.0, 1.0]])
        np.testing.assert_array_equal(outputs, [[3.5, -1.0]])

    @pytest.mark.parametrize(
        ["act", "inputs", "expected"],
        [
            ("relu", [[-1.0], [2.0]], [[0.0], [2.0]]),
            ("tanh", [[0.0]], [[0.0]]),
            ("ball", [[0.5]], [[np.tanh(0.5)]]),
            ("ball", [[-4.0]], [[np.tanh(-4.0)]]),
            ("ball", [[0.0]], [[0.0]]),
        ],
    )
    def test_activations(self, act, inputs, expected):
        outputs, _ = forward(scalar_net(1.0, act), inputs)
        np.testing.assert_allclose(outputs, expected)

    def test_ball_squashes_along_the_radius(self):
        layer = Layer(np.eye(2), [0.0, 0.0], "ball")
        outputs, _ = forward(MlpParams([layer]), [[3.0, 4.0]])
        np.testing.assert_allclose(outputs, [[0.6 * np.tanh(5.0), 0.8 * np.tanh(5.0)]])

    @pytest.mark.parametrize("radius", [0.5, 1.0, 2.0, 3.0])
    def test_ball_keeps_a_radial_gradient_outside_the_sphere(self, radius):
        layer = Layer(np.eye(2), [0.0, 0.0], "ball")
        params = MlpParams([layer])
        _, tape = forward(params, [[radius, 0.0]])
        _, d_inputs = backward(params, tape, [[1.0, 0.0]])
        np.testing.assert_allclose(d_inputs, [[1 - np.tanh(radius) ** 2, 0.0]], rtol=1e-12)

    def test_ball_output_stays_in_the_unit_ball(self):
        generator = init_generator(np.random.default_rng(0))
        generator = generator.unflatten(generator.flatten() * 10)
        outputs, _ = forward(generator, np.random.default_rng(1).standard_normal((200, 2)))
        assert np.max(np.linalg.norm(outputs, axis=1)) <= 1 + 1e-12

    @pytest.mark.parametrize(
        ["build", "error"],
        [
            (lambda: Layer([[1.0]], [0.0], "sigmoid"), Exceptions.ParameterError),
            (lambda: Layer([[1.0, 2.0]], [0.0, 0.0], "tanh"), Exceptions.DimensionMismatch),
            (lambda: Layer([[np.inf]], [0.0], "tanh"), Exceptions.NonFiniteValue),
            (lambda: MlpParams([]), Exceptions.ParameterError),
            (
                lambda: MlpParams([Layer([[1.0, 1.0]], [0.0], "tanh")] * 2),
                Exceptions.DimensionMismatch,
            ),
            (lambda: init_mlp([2, 3], ["tanh", "tanh"]), Exceptions.ParameterError),
        ],
    )
    def test_invalid_networks(self, build, error):
        with pytest.raises(error):
            build()

    def test_input_dimension_is_checked(self):
        with pytest.raises(Exceptions.DimensionMismatch):
            forward(init_embedding(4, rng=0), [[0.1, 0.2, 0.3]])

    def test_layers_are_frozen(self):
        params = init_embedding(4, rng=0)
        with pytest.raises(ValueError):
            params.layers[0].w[0, 0] = 1.0

    def test_flatten_and_unflatten(self):
        params = init_generator(rng=3, hidden=8)
        rebuilt = params.unflatten(params.flatten())
        assert rebuilt == params
        assert rebuilt.size == params.size == 2 * 8 + 8 + 8 * 8 + 8 + 8 * 2 + 2
        with pytest.raises(Exceptions.DimensionMismatch):
            params.unflatten(np.zeros(3))

    def test_initialization_is_seeded(self):
        assert init_generator(rng=5) == init_generator(rng=5)
        assert init_generator(rng=5) != init_generator(rng=6)
        shape = init_embedding(8, rng=0).shape()
        assert shape == [(2, 16, "tanh"), (16, 8, "identity")]


class TestBackward:
    @pytest.mark.parametrize("seed", range(5))
    def test_parameter_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        params = scaled_network(seed)
        inputs, cotangent = rng.standard_normal((7, 3)), rng.standard_normal((7, 2))
        outputs, tape = forward(params, inputs)
        grads, _ = backward(params, tape, cotangent)

        direction = rng.standard_normal(params.size)
        h, flat = 1e-6, params.flatten()
        plus = weighted_output(params.unflatten(flat + h * direction), inputs, cotangent)
        minus = weighted_output(params.unflatten(flat - h * direction), inputs, cotangent)
        numeric = (plus - minus) / (2 * h)
        analytic = float(grads.flatten() @ direction)
        assert analytic == pytest.approx(numeric, rel=1e-5, abs=1e-7)

    @pytest.mark.parametrize("seed", range(5))
    def test_input_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(100 + seed)
        params = scaled_network(seed)
        inputs, cotangent = rng.standard_normal((4, 3)), rng.standard_normal((4, 2))
        _, tape = forward(params, inputs)
        _, d_inputs = backward(params, tape, cotangent)

        direction = rng.standard_normal(inputs.shape)
        h = 1e-6
        plus = weighted_output(params, inputs + h * direction, cotangent)
        minus = weighted_output(params, inputs - h * direction, cotangent)
        numeric = (plus - minus) / (2 * h)
        assert float(np.sum(d_inputs * direction)) == pytest.approx(numeric, rel=1e-5, abs=1e-7)

    def test_scalar_chain(self):
        # y = 2x, so d(sum y * c)/dw = sum x * c.
        params = scalar_net(2.0)
        _, tape = forward(params, [[1.0], [3.0]])
        grads, d_inputs = backward(params, tape, [[1.0], [-1.0]])
        assert grads.grads[0][0][0, 0] == -2.0
        assert grads.grads[0][1][0] == 0.0
        np.testing.assert_array_equal(d_inputs, [[2.0], [-2.0]])

    def test_stale_tape(self):
        params = init_embedding(3, rng=0)
        _, tape = forward(params, [[0.1, 0.2]])
        copy = params.unflatten(params.flatten())
        with pytest.raises(Exceptions.StaleTape):
            backward(copy, tape, [[1.0, 1.0, 1.0]])

    def test_cotangent_shape(self):
        params = init_embedding(3, rng=0)
        _, tape = forward(params, [[0.1, 0.2]])
        with pytest.raises(Exceptions.DimensionMismatch):
            backward(params, tape, [[1.0, 1.0]])


class TestGradBuffer:
    def test_arithmetic(self):
        params = scalar_net(1.0)
        grads = GradBuffer([([[2.0]], [1.0])])
        total = grads + 0.5 * grads
        assert total.grads[0][0][0, 0] == 3.0
        assert total.norm() == pytest.approx(np.sqrt(9.0 + 2.25))
        assert GradBuffer.zeros_like(params).norm() == 0.0

    def test_non_finite(self):
        assert not GradBuffer([([[np.nan]], [0.0])]).is_finite()


class TestClipping:
    def test_clip_bounds_every_parameter(self):
        params = scaled_network(0, factor=20.0)
        clipped = clip_weights(params, 0.5)
        assert clipped.max_abs() <= 0.5
        assert clipped.shape() == params.shape()

    def test_small_parameters_are_unchanged(self):
        params = init_embedding(4, rng=0)
        assert clip_weights(params, 10.0) == params

    def test_clip_must_be_positive(self):
        with pytest.raises(Exceptions.ParameterError):
            clip_weights(scalar_net(1.0), 0.0)


class TestOptimizers:
    @pytest.mark.parametrize("direction", [1, -1])
    def test_sgd_step(self, direction):
        params = scalar_net(1.0)
        grads = GradBuffer([([[2.0]], [-1.0])])
        updated, state = apply_update(params, grads, OptimizerState("sgd", lr=0.1), direction)
        assert updated.layers[0].w[0, 0] == pytest.approx(1.0 + direction * 0.2)
        assert updated.layers[0].b[0] == pytest.approx(-direction * 0.1)
        assert state.step == 1
        assert params.layers[0].w[0, 0] == 1.0

    def test_adam_first_step_moves_by_the_learning_rate(self):
        params = scalar_net(1.0)
        grads = GradBuffer([([[5.0]], [0.0])])
        updated, state = apply_update(params, grads, OptimizerState("adam", lr=0.01), -1)
        assert updated.layers[0].w[0, 0] == pytest.approx(0.99, abs=1e-8)
        assert updated.layers[0].b[0] == 0.0
        assert state.moments is not None

    def test_adam_moments_accumulate(self):
        params, state = scalar_net(1.0), OptimizerState("adam", lr=0.01)
        grads = GradBuffer([([[1.0]], [0.0])])
        for _ in range(3):
            params, state = apply_update(params, grads, state, 1)
        assert state.step == 3
        assert params.layers[0].w[0, 0] == pytest.approx(1.03, abs=1e-6)

    @pytest.mark.parametrize("kind", ["sgd", "adam"])
    def test_zero_learning_rate_freezes_parameters(self, kind):
        params = init_embedding(3, rng=0)
        grads = GradBuffer([(np.ones_like(l.w), np.ones_like(l.b)) for l in params])
        updated, _ = apply_update(params, grads, OptimizerState(kind, lr=0.0), 1)
        assert updated == params

    @pytest.mark.parametrize(
        ["build", "error"],
        [
            (lambda: OptimizerState("rmsprop", lr=0.1), Exceptions.ParameterError),
            (lambda: OptimizerState("sgd", lr=-0.1), Exceptions.ParameterError),
            (lambda: OptimizerState("adam", lr=0.1, beta1=1.0), Exceptions.ParameterError),
        ],
    )
    def test_invalid_state(self, build, error):
        with pytest.raises(error):
            build()

    def test_invalid_update(self):
        params, state = scalar_net(1.0), OptimizerState("sgd", lr=0.1)
        with pytest.raises(Exceptions.ParameterError):
            apply_update(params, GradBuffer.zeros_like(params), state, 0)
        with pytest.raises(Exceptions.DimensionMismatch):
            apply_update(params, GradBuffer.zeros_like(init_embedding(2, rng=0)), state, 1)


class TestCheckpoints:
    def test_save_and_load_is_exact(self, tmp_path):
        params = init_generator(rng=np.random.default_rng(7))
        save_checkpoint(params, tmp_path / "generator.json")
        assert load_checkpoint(tmp_path / "generator.json") == params

    def test_document_layout(self, tmp_path):
        save_checkpoint(scalar_net(0.5, "tanh"), tmp_path / "net.json")
        document = json.loads((tmp_path / "net.json").read_text())
        assert document == {"layers": [{"w": [[0.5]], "b": [0.0], "act": "tanh"}]}

    @pytest.mark.parametrize(
        "document",
        [
            [],
            {"layers": "none"},
            {"layers": [{"w": [[1.0]], "b": [0.0]}]},
            {"layers": [{"w": [[1.0]], "b": [0.0], "act": "softmax"}]},
        ],
    )
    def test_invalid_documents(self, document):
        with pytest.raises(Exceptions.ParameterError):
            params_from_dict(document)

    def test_unreadable_files(self, tmp_path):
        with pytest.raises(Exceptions.ParameterError, match="cannot read"):
            load_checkpoint(tmp_path / "missing.json")
        (tmp_path / "broken.json").write_text("{")
        with pytest.raises(Exceptions.ParameterError, match="not valid JSON"):
            load_checkpoint(tmp_path / "broken.json")
