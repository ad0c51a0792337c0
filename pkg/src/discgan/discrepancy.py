"""
The discrepancy between two empirical distributions.

For squared loss and linear hypotheses with ||w|| <= 1, the discrepancy has the closed form
2 ||M||_2 with M = (1/n) Xg^T Xg - (1/m) Xr^T Xr. For 0-1 loss and halfplanes in two dimensions,
it is computed exactly by enumerating every labeling that a halfplane can induce on the pooled
points.
"""

import dataclasses
import math
from typing import Any

import numpy as np

from .base import Exceptions, Types
from .linalg import EigPair, SpectralSolverBase, SymMatrix, resolve_solver, uncentered_covariance
from .samples import SampleMatrix, check_same_dim, load_samples, save_samples
from .util import Log
from .util.typing import RngLike, as_generator, check_positive

EXHAUSTIVE_MAX_POINTS = 64

# Hypotheses of norm at most this radius make 2 ||M||_2 the exact supremum of the loss gap.
THEOREM1_RADIUS = 1 / math.sqrt(2)


@dataclasses.dataclass(frozen=True)
class DiscResult:
    """
    Squared-loss discrepancy together with what its gradient needs: the signed dominant eigenvalue
    of M (`spectral`), its unit eigenvector (`direction`) and sign.
    """

    value: float
    spectral: float
    direction: Types.Array
    sign: int
    converged: bool = True
    tie: bool = False
    degenerate: bool = False

    @classmethod
    def from_eigpair(cls, pair: EigPair) -> "DiscResult":
        return cls(
            value=2 * abs(pair.value),
            spectral=pair.value,
            direction=pair.vector,
            sign=1 if pair.value >= 0 else -1,
            converged=pair.converged,
            tie=pair.tie,
            degenerate=pair.degenerate,
        )

    def as_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "spectral": self.spectral,
            "sign": self.sign,
            "converged": self.converged,
            "direction": self.direction,
        }


def cov_diff(real: SampleMatrix | Any, generated: SampleMatrix | Any) -> SymMatrix:
    """Returns uncentered_covariance(generated) - uncentered_covariance(real)."""
    real, generated = SampleMatrix.coerce(real), SampleMatrix.coerce(generated)
    check_same_dim(real, generated)
    return uncentered_covariance(generated) - uncentered_covariance(real)


def empirical_discrepancy(
    real: SampleMatrix | Any,
    generated: SampleMatrix | Any,
    solver: SpectralSolverBase | None = None,
    rng: RngLike = None,
) -> DiscResult:
    """
    Squared-loss discrepancy between two sample matrices under unit-norm linear hypotheses.

    Args:
        real:
            The m-by-d sample of the reference distribution.
        generated:
            The n-by-d sample of the distribution to compare.
        solver:
            Spectral solver used for the dominant eigenpair of `cov_diff(real, generated)`. Defaults
            to `linalg.PowerMethod()`.
        rng:
            Random source of the solver's start vector.
    """

    matrix = cov_diff(real, generated)
    pair = resolve_solver(solver).dominant(matrix, rng=rng)
    return DiscResult.from_eigpair(pair)


def squared_loss_slack(
    real: SampleMatrix,
    generated: SampleMatrix,
    h: Types.Array,
    f: Types.Array,
    disc: float,
) -> float:
    """
    Returns E_generated[(h.x - f.x)^2] + disc - E_real[(h.x - f.x)^2], the slack of the empirical
    learning bound for the hypothesis pair (h, f).
    """
    u = np.asarray(h, dtype=np.float64) - np.asarray(f, dtype=np.float64)
    loss_generated = float(np.mean((generated.data @ u) ** 2))
    loss_real = float(np.mean((real.data @ u) ** 2))
    return loss_generated + disc - loss_real


def theorem1_gap(
    real: SampleMatrix | Any,
    generated: SampleMatrix | Any,
    trials: int,
    rng: RngLike = None,
    radius: float = THEOREM1_RADIUS,
    solver: SpectralSolverBase | None = None,
) -> float:
    """
    Probes the empirical learning bound E_real l(h, f) <= E_generated l(h, f) + disc(real,
    generated) on random hypothesis pairs and returns the smallest slack found. A negative result
    would be a counterexample.

    Args:
        trials:
            Number of random (h, f) pairs.
        radius:
            Norm of the drawn hypotheses. The default makes the bound tight, so the slack is never
            negative beyond rounding; larger radii exceed the hypothesis class the closed form is
            derived for.
    """

    real, generated = SampleMatrix.coerce(real), SampleMatrix.coerce(generated)
    dim = check_same_dim(real, generated)
    check_positive(trials, "trials", integer=True)
    check_positive(radius, "radius")
    generator = as_generator(rng)

    disc = empirical_discrepancy(real, generated, solver=solver, rng=generator).value
    directions = generator.standard_normal((2 * trials, dim))
    directions *= radius / np.linalg.norm(directions, axis=1, keepdims=True)

    worst = math.inf
    for h, f in zip(directions[0::2], directions[1::2]):
        worst = min(worst, squared_loss_slack(real, generated, h, f, disc))
    Log.debug(lambda: f"Learning-bound slack over ${trials} trial$: worst |{worst:.3e}|.")
    return worst


def _halfplane_labelings(points: Types.Array) -> np.ndarray:
    """
    Returns every labeling in {-1, +1}^N that an open or closed halfplane induces on the given
    points, up to complement (the first point is always labeled +1). Every such labeling is
    obtained from a line through two distinct points: points off the line take the side they lie
    on, and the points on it can be split at any threshold along the line, in either direction, by
    rotating and shifting the line slightly.
    """

    count = len(points)
    scale = max(1.0, float(np.max(np.abs(points))))
    eps = 1e-12 * scale * scale
    labelings = [np.ones(count, dtype=np.int8)]

    for i in range(count):
        offsets = points - points[i]
        for j in range(i + 1, count):
            direction = offsets[j]
            if not np.any(direction):
                continue
            side = direction[0] * offsets[:, 1] - direction[1] * offsets[:, 0]
            base = np.where(side > eps, 1, np.where(side < -eps, -1, 0)).astype(np.int8)
            online = np.flatnonzero(base == 0)
            along = offsets[online] @ direction
            levels = np.unique(along)
            ranks = np.searchsorted(levels, along)
            for threshold in range(len(levels) + 1):
                for upper in (True, False):
                    labels = base.copy()
                    above = ranks >= threshold
                    labels[online] = np.where(above if upper else ~above, 1, -1)
                    labelings.append(labels)

    stacked = np.array(labelings, dtype=np.int8)
    stacked *= np.where(stacked[:, :1] < 0, -1, 1).astype(np.int8)
    return np.unique(stacked, axis=0)


def disc_zero_one_linear_2d(
    p: SampleMatrix | Any,
    q: SampleMatrix | Any,
    chunk: int = 512,
) -> float:
    """
    Exact 0-1-loss discrepancy between two planar samples under halfplane hypotheses: the largest
    value of |P(h != h') - Q(h != h')| over pairs of halfplanes h, h'. Runs in O(N^4) time for N
    pooled points, so each side is limited to 64 points.
    """

    p, q = SampleMatrix.coerce(p), SampleMatrix.coerce(q)
    if p.cols != 2 or q.cols != 2:
        raise Exceptions.DimensionMismatch("0-1 discrepancy is defined for planar samples only")
    if p.rows > EXHAUSTIVE_MAX_POINTS or q.rows > EXHAUSTIVE_MAX_POINTS:
        raise Exceptions.OracleSizeLimit("exhaustive size limit")

    points = np.vstack([p.data, q.data])
    weights = np.concatenate([np.full(p.rows, 1 / p.rows), np.full(q.rows, -1 / q.rows)])
    signs = _halfplane_labelings(points).astype(np.float64)
    Log.debug(f"Enumerated ${len(signs)} halfplane labeling$ of ${len(points)} point$.")

    # With +-1 labels, [h != h'] = (1 - h h') / 2 and the weights sum to zero, so the signed gap of
    # a pair is -(h^T W h') / 2.
    weighted = signs * weights
    best = 0.0
    for start in range(0, len(signs), chunk):
        block = signs[start : start + chunk] @ weighted.T
        best = max(best, float(np.max(np.abs(block))) / 2)
    return min(best, 1.0)


__all__ = (
    "DiscResult",
    "SampleMatrix",
    "cov_diff",
    "disc_zero_one_linear_2d",
    "empirical_discrepancy",
    "load_samples",
    "save_samples",
    "squared_loss_slack",
    "theorem1_gap",
)
