from typing import get_args

import numpy as np

from ..base import Exceptions, Types
from ..util.typing import check_positive
from .mlp import GradBuffer, Layer, MlpParams


class OptimizerState:
    """
    Immutable optimizer state. For Adam, the first and second moment estimates are kept per
    parameter array, in the order of `MlpParams.arrays()`.
    """

    kind: Types.OptimizerKind
    lr: float
    beta1: float
    beta2: float
    eps: float
    step: int
    moments: tuple[tuple[Types.Array, Types.Array], ...] | None

    def __init__(
        self,
        kind: Types.OptimizerKind,
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        step: int = 0,
        moments: tuple[tuple[Types.Array, Types.Array], ...] | None = None,
    ):
        """
        Args:
            kind:
                `"sgd"` for plain gradient steps or `"adam"`.
            lr:
                Learning rate. Zero is allowed and freezes the parameters.
            beta1, beta2, eps:
                Adam's decay rates and denominator offset. Ignored by SGD.
            step:
                Number of updates applied so far.
            moments:
                Adam's (first, second) moment pairs, or None before the first update.
        """
        if kind not in get_args(Types.OptimizerKind):
            raise Exceptions.ParameterError(f"unknown optimizer '{kind}'")
        check_positive(lr, "learning rate", allow_zero=True)
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise Exceptions.ParameterError("Adam decay rates must lie in [0, 1)")
        check_positive(eps, "eps")
        self.kind = kind
        self.lr = float(lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step = step
        self.moments = moments

    def _evolve(self, step: int, moments) -> "OptimizerState":
        return OptimizerState(self.kind, self.lr, self.beta1, self.beta2, self.eps, step, moments)

    def __repr__(self):
        return f"{self.__class__.__name__}({self.kind}, lr={self.lr}, step={self.step})"


def apply_update(
    params: MlpParams,
    grads: GradBuffer,
    state: OptimizerState,
    direction: int,
) -> tuple[MlpParams, OptimizerState]:
    """
    Moves the parameters along the gradient: `direction=+1` ascends, `direction=-1` descends.

    Returns:
        The updated parameters and the advanced optimizer state. Neither input is modified.
    """

    if direction not in (1, -1):
        raise Exceptions.ParameterError(f"direction must be +1 or -1 (got {direction})")
    grads.check_matches(params)
    step = state.step + 1

    if state.kind == "sgd":
        steps = [(dw, db) for dw, db in grads]
        moments = None
    else:
        previous = state.moments or tuple(
            ((np.zeros_like(dw), np.zeros_like(dw)), (np.zeros_like(db), np.zeros_like(db)))
            for dw, db in grads
        )
        b1, b2 = state.beta1, state.beta2
        steps, moments = [], []
        for (dw, db), pair in zip(grads, previous):
            layer_steps, layer_moments = [], []
            for g, (m, v) in zip((dw, db), pair):
                m = b1 * m + (1 - b1) * g
                v = b2 * v + (1 - b2) * g * g
                m_hat = m / (1 - b1**step)
                v_hat = v / (1 - b2**step)
                layer_steps.append(m_hat / (np.sqrt(v_hat) + state.eps))
                layer_moments.append((m, v))
            steps.append(tuple(layer_steps))
            moments.append(tuple(layer_moments))
        moments = tuple(moments)

    scale = direction * state.lr
    layers = [
        Layer(layer.w + scale * sw, layer.b + scale * sb, layer.act)
        for layer, (sw, sb) in zip(params, steps)
    ]
    return MlpParams(layers), state._evolve(step, moments)
