from collections.abc import Iterator, Sequence
from typing import Any, get_args

import numpy as np

from ..base import Exceptions, Types
from ..util.typing import RngLike, as_float_matrix, as_generator, check_positive


class Layer:
    """
    One affine map followed by an activation, applied row-wise: y = act(x W^T + b). The weight
    matrix is `out`-by-`in`. Arrays are copied and frozen on construction.

    The `"ball"` activation is the radial squashing x -> tanh(|x|) x / |x| that maps every row into
    the open unit ball. Its radial derivative never vanishes.
    """

    w: Types.Array
    b: Types.Array
    act: Types.Activation

    def __init__(self, w: Any, b: Any, act: Types.Activation):
        w = as_float_matrix(w, name="weight matrix").copy()
        b = np.array(b, dtype=np.float64).reshape(-1)
        if act not in get_args(Types.Activation):
            raise Exceptions.ParameterError(f"unknown activation '{act}'")
        if b.shape[0] != w.shape[0]:
            raise Exceptions.DimensionMismatch(
                f"bias of length {b.shape[0]} does not match weight matrix {w.shape}",
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise Exceptions.NonFiniteValue("layer parameters must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        self.w, self.b, self.act = w, b, act

    @property
    def in_dim(self) -> int:
        return self.w.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w.shape[0]

    def replace(self, w: Any = None, b: Any = None) -> "Layer":
        return Layer(self.w if w is None else w, self.b if b is None else b, self.act)

    def __eq__(self, other):
        if not isinstance(other, Layer):
            return NotImplemented
        return (
            self.act == other.act
            and np.array_equal(self.w, other.w)
            and np.array_equal(self.b, other.b)
        )

    __hash__ = None  # type: ignore

    def __repr__(self):
        return f"{self.__class__.__name__}({self.in_dim}->{self.out_dim}, {self.act})"


class MlpParams:
    """
    Parameters of a feed-forward network: an ordered, immutable sequence of layers whose
    dimensions chain. Updates produce new instances.
    """

    layers: tuple[Layer, ...]

    def __init__(self, layers: Sequence[Layer]):
        if len(layers) == 0:
            raise Exceptions.ParameterError("a network needs at least one layer")
        for index, (prev, layer) in enumerate(zip(layers[:-1], layers[1:])):
            if prev.out_dim != layer.in_dim:
                raise Exceptions.DimensionMismatch(
                    f"layer {index} outputs {prev.out_dim} values but layer {index + 1} expects "
                    f"{layer.in_dim}",
                )
        self.layers = tuple(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def size(self) -> int:
        """Total number of scalar parameters."""
        return sum(layer.w.size + layer.b.size for layer in self.layers)

    def arrays(self) -> Iterator[Types.Array]:
        for layer in self.layers:
            yield layer.w
            yield layer.b

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(array))) for array in self.arrays())

    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(array * array) for array in self.arrays())))

    def flatten(self) -> Types.Array:
        return np.concatenate([array.reshape(-1) for array in self.arrays()])

    def unflatten(self, vector: Any) -> "MlpParams":
        """Builds a network of the same shape and activations from a flat parameter vector."""
        vector = np.asarray(vector, dtype=np.float64).reshape(-1)
        if vector.size != self.size:
            raise Exceptions.DimensionMismatch(
                f"expected {self.size} parameters, got {vector.size}",
            )
        layers, offset = [], 0
        for layer in self.layers:
            w = vector[offset : offset + layer.w.size].reshape(layer.w.shape)
            offset += layer.w.size
            b = vector[offset : offset + layer.b.size]
            offset += layer.b.size
            layers.append(Layer(w, b, layer.act))
        return MlpParams(layers)

    def shape(self) -> list[tuple[int, int, str]]:
        return [(layer.in_dim, layer.out_dim, layer.act) for layer in self.layers]

    def __len__(self):
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)

    def __eq__(self, other):
        if not isinstance(other, MlpParams):
            return NotImplemented
        return len(self) == len(other) and all(a == b for a, b in zip(self, other))

    __hash__ = None  # type: ignore

    def __repr__(self):
        dims = " -> ".join([str(self.in_dim)] + [f"{l.out_dim} ({l.act})" for l in self.layers])
        return f"{self.__class__.__name__}({dims})"


class GradBuffer:
    """Partial derivatives with respect to every weight and bias of a matching network."""

    grads: tuple[tuple[Types.Array, Types.Array], ...]

    def __init__(self, grads: Sequence[tuple[Any, Any]]):
        self.grads = tuple(
            (np.asarray(dw, dtype=np.float64), np.asarray(db, dtype=np.float64).reshape(-1))
            for dw, db in grads
        )

    @classmethod
    def zeros_like(cls, params: MlpParams) -> "GradBuffer":
        return cls([(np.zeros_like(layer.w), np.zeros_like(layer.b)) for layer in params])

    def check_matches(self, params: MlpParams):
        if len(self.grads) != len(params.layers) or any(
            dw.shape != layer.w.shape or db.shape != layer.b.shape
            for (dw, db), layer in zip(self.grads, params.layers)
        ):
            raise Exceptions.DimensionMismatch("gradient buffer does not match the network shape")

    def arrays(self) -> Iterator[Types.Array]:
        for dw, db in self.grads:
            yield dw
            yield db

    def flatten(self) -> Types.Array:
        return np.concatenate([array.reshape(-1) for array in self.arrays()])

    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(array * array) for array in self.arrays())))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(array)) for array in self.arrays())

    def __add__(self, other: "GradBuffer") -> "GradBuffer":
        if not isinstance(other, GradBuffer):
            return NotImplemented
        return GradBuffer(
            [(dw1 + dw2, db1 + db2) for (dw1, db1), (dw2, db2) in zip(self.grads, other.grads)],
        )

    def __mul__(self, factor: float) -> "GradBuffer":
        return GradBuffer([(dw * factor, db * factor) for dw, db in self.grads])

    __rmul__ = __mul__

    def __len__(self):
        return len(self.grads)

    def __iter__(self):
        return iter(self.grads)

    def __repr__(self):
        return f"{self.__class__.__name__}(norm={self.norm():.6g})"


class Tape:
    """
    Everything `backward()` needs from a forward pass: the input, pre-activation, and output of
    each layer, and the network that produced them.
    """

    def __init__(self, params: MlpParams):
        self.params = params
        self.inputs: list[Types.Array] = []
        self.preacts: list[Types.Array] = []
        self.outputs: list[Types.Array] = []


def _ball_ratio(norms: Types.Array) -> Types.Array:
    """tanh(r) / r, continued by 1 at r = 0."""
    safe = np.where(norms > 1e-8, norms, 1.0)
    return np.where(norms > 1e-8, np.tanh(safe) / safe, 1.0)


def _activate(act: Types.Activation, z: Types.Array) -> Types.Array:
    if act == "tanh":
        return np.tanh(z)
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "ball":
        return z * _ball_ratio(np.linalg.norm(z, axis=1, keepdims=True))
    return z


def _activate_backward(
    act: Types.Activation,
    z: Types.Array,
    y: Types.Array,
    dy: Types.Array,
) -> Types.Array:
    if act == "tanh":
        return dy * (1 - y * y)
    if act == "relu":
        return dy * (z > 0)
    if act == "ball":
        # The Jacobian is ratio * I + (sech^2 |z| - ratio) u u^T with u = z / |z|.
        norms = np.linalg.norm(z, axis=1, keepdims=True)
        ratio = _ball_ratio(norms)
        unit = np.divide(z, norms, out=np.zeros_like(z), where=norms > 0)
        radial = np.sum(unit * dy, axis=1, keepdims=True)
        return ratio * dy + (1 - np.tanh(norms) ** 2 - ratio) * radial * unit
    return dy


def forward(params: MlpParams, inputs: Any) -> tuple[Types.Array, Tape]:
    """
    Applies the network to every row of `inputs`.

    Returns:
        The output matrix (one row per input row) and the tape for `backward()`.
    """

    x = as_float_matrix(inputs, name="network input")
    if x.shape[1] != params.in_dim:
        raise Exceptions.DimensionMismatch(
            f"network expects inputs of dimension {params.in_dim}, got {x.shape[1]}",
        )
    tape = Tape(params)
    for layer in params:
        z = x @ layer.w.T + layer.b
        y = _activate(layer.act, z)
        tape.inputs.append(x)
        tape.preacts.append(z)
        tape.outputs.append(y)
        x = y
    return x, tape


def backward(params: MlpParams, tape: Tape, d_outputs: Any) -> tuple[GradBuffer, Types.Array]:
    """
    Reverse-mode differentiation of sum(Y * dY), where Y is the output recorded in `tape`.

    Args:
        params:
            The network. Must be the very instance that recorded `tape`.
        tape:
            The record of the matching `forward()` call.
        d_outputs:
            The cotangent dY, shaped like the forward output.

    Returns:
        The parameter gradients and the input gradient dX.
    """

    if tape.params is not params:
        raise Exceptions.StaleTape("activation tape was recorded for different parameters")
    da = as_float_matrix(d_outputs, name="output gradient")
    if da.shape != tape.outputs[-1].shape:
        raise Exceptions.DimensionMismatch(
            f"output gradient of shape {da.shape} does not match output {tape.outputs[-1].shape}",
        )

    grads: list[tuple[Types.Array, Types.Array]] = []
    for layer, x, z, y in reversed(list(zip(params, tape.inputs, tape.preacts, tape.outputs))):
        dz = _activate_backward(layer.act, z, y, da)
        grads.append((dz.T @ x, dz.sum(axis=0)))
        da = dz @ layer.w
    return GradBuffer(grads[::-1]), da


def clip_weights(params: MlpParams, c: float) -> MlpParams:
    """Clamps every weight and bias into [-c, c]."""
    check_positive(c, "clip constant")
    return MlpParams(
        [
            Layer(np.clip(layer.w, -c, c), np.clip(layer.b, -c, c), layer.act)
            for layer in params
        ],
    )


def init_mlp(
    sizes: Sequence[int],
    activations: Sequence[Types.Activation],
    rng: RngLike = None,
) -> MlpParams:
    """
    Creates a network with weights drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)] and zero
    biases.

    Args:
        sizes:
            Layer widths, input first: `[2, 32, 2]` is a network with one hidden layer.
        activations:
            One activation per layer, so one fewer than `sizes`.
        rng:
            Random source for the weights.
    """

    if len(activations) != len(sizes) - 1:
        raise Exceptions.ParameterError(
            f"{len(sizes) - 1} layers need as many activations, got {len(activations)}",
        )
    for size in sizes:
        check_positive(size, "layer size", integer=True)
    generator = as_generator(rng)
    layers = []
    for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
        bound = 1 / np.sqrt(fan_in)
        weights = generator.uniform(-bound, bound, (fan_out, fan_in))
        layers.append(Layer(weights, np.zeros(fan_out), act))
    return MlpParams(layers)


def init_generator(
    rng: RngLike = None,
    latent_dim: int = 2,
    hidden: int = 32,
    out_dim: int = 2,
) -> MlpParams:
    """The toy generator: two tanh hidden layers and a linear output squashed into the unit ball."""
    return init_mlp([latent_dim, hidden, hidden, out_dim], ["tanh", "tanh", "ball"], rng)


def init_embedding(
    embed_dim: int,
    rng: RngLike = None,
    in_dim: int = 2,
    hidden: int = 16,
) -> MlpParams:
    """The toy embedding network: one tanh hidden layer and a linear output."""
    return init_mlp([in_dim, hidden, embed_dim], ["tanh", "identity"], rng)
