"""
Ensemble weights for pre-trained generators. With second moments S_k of p generators and S_r of
the real data, the mixture with weights alpha on the simplex has

    F(alpha) = || sum_k alpha_k S_k - S_r ||_2,

which is convex in alpha (a norm of an affine map). It is minimized by projected subgradient
descent; an exhaustive lattice search serves as the reference for small p.
"""

import itertools
import math
import statistics
from collections.abc import Sequence
from typing import Any, NamedTuple

import numpy as np

from .base import Exceptions, Types
from .datagen import RngStream, SamplerBase, as_stream
from .linalg import ExactSolver, SpectralSolverBase, SymMatrix, resolve_solver
from .linalg.symmetric import uncentered_covariance
from .samples import SampleMatrix, check_same_dim
from .util import Log
from .util.typing import RngLike, as_generator, check_positive

SIMPLEX_TOLERANCE = 1e-12
GRID_MAX_POINTS = 2_000_000


class MixtureWeights:
    """A point on the probability simplex, with the objective trace that produced it."""

    alpha: Types.Array
    trace: list[tuple[int, float]]

    def __init__(self, alpha: Any, trace: Sequence[tuple[int, float]] = ()):
        alpha = np.array(alpha, dtype=np.float64).reshape(-1)
        if alpha.size == 0:
            raise Exceptions.ParameterError("mixture weights must not be empty")
        if not np.all(np.isfinite(alpha)) or np.any(alpha < 0):
            raise Exceptions.ParameterError("mixture weights must be finite and non-negative")
        if abs(float(np.sum(alpha)) - 1) > SIMPLEX_TOLERANCE:
            raise Exceptions.ParameterError(f"mixture weights sum to {np.sum(alpha)!r}, not 1")
        alpha.setflags(write=False)
        self.alpha = alpha
        self.trace = list(trace)

    @classmethod
    def uniform(cls, p: int) -> "MixtureWeights":
        return cls(simplex_project(np.full(p, 1 / p)))

    @property
    def p(self) -> int:
        return self.alpha.size

    @property
    def objective(self) -> float | None:
        """Lowest objective value in the trace."""
        return min(value for _, value in self.trace) if self.trace else None

    def __repr__(self):
        return f"{self.__class__.__name__}({np.array2string(self.alpha, precision=4)})"


class EnsembleInputs:
    """
    Samples of p generators and of the real data, all of one dimension, with their uncentered
    second-moment matrices computed once.
    """

    def __init__(self, generators: Sequence[SampleMatrix | Any], real: SampleMatrix | Any):
        if len(generators) == 0:
            raise Exceptions.ParameterError("need at least one generator sample")
        self.generators = [SampleMatrix.coerce(samples) for samples in generators]
        self.real = SampleMatrix.coerce(real)
        self.dim = check_same_dim(self.real, *self.generators)
        self.moments = [uncentered_covariance(samples) for samples in self.generators]
        self.real_moment = uncentered_covariance(self.real)

    @property
    def p(self) -> int:
        return len(self.generators)

    def permuted(self, order: Sequence[int]) -> "EnsembleInputs":
        return EnsembleInputs([self.generators[k] for k in order], self.real)

    def __repr__(self):
        return f"{self.__class__.__name__}(p={self.p}, dim={self.dim})"


class EnsembleValue(NamedTuple):
    value: float
    direction: Types.Array
    sign: int
    converged: bool
    degenerate: bool


def _weights(alpha: "MixtureWeights | Any", inputs: EnsembleInputs) -> Types.Array:
    weights = alpha.alpha if isinstance(alpha, MixtureWeights) else np.asarray(alpha, float)
    if weights.shape != (inputs.p,):
        raise Exceptions.DimensionMismatch(
            f"{weights.size} mixture weights for {inputs.p} generators",
        )
    return weights


def mixture_cov_diff(alpha: "MixtureWeights | Any", inputs: EnsembleInputs) -> SymMatrix:
    """Returns sum_k alpha_k S_k - S_r, accumulated in generator order."""
    weights = _weights(alpha, inputs)
    total = np.zeros((inputs.dim, inputs.dim))
    for weight, moment in zip(weights, inputs.moments):
        total = total + weight * moment.entries
    return SymMatrix(total - inputs.real_moment.entries)


def ensemble_objective(
    alpha: "MixtureWeights | Any",
    inputs: EnsembleInputs,
    solver: SpectralSolverBase | None = None,
    rng: RngLike = None,
) -> EnsembleValue:
    """F(alpha) with the dominant eigenvector and sign needed for a subgradient."""
    pair = resolve_solver(solver).dominant(mixture_cov_diff(alpha, inputs), rng=rng)
    return EnsembleValue(
        value=abs(pair.value),
        direction=pair.vector,
        sign=1 if pair.value >= 0 else -1,
        converged=pair.converged,
        degenerate=pair.degenerate,
    )


def simplex_project(v: Any) -> Types.Array:
    """
    Euclidean projection onto the probability simplex by sorting and thresholding. The output is
    non-negative and sums to one; the rounding residual of the sum goes to the largest coordinate.
    """

    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise Exceptions.ParameterError("cannot project an empty vector")
    if not np.all(np.isfinite(v)):
        raise Exceptions.NonFiniteValue("cannot project a non-finite vector")
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u)
    rho = int(np.nonzero(u * np.arange(1, v.size + 1) > cumulative - 1)[0][-1])
    tau = (cumulative[rho] - 1) / (rho + 1)
    out = np.maximum(v - tau, 0.0)
    largest = int(np.argmax(out))
    out[largest] += 1 - np.sum(out)
    return out


def edgan_optimize(
    inputs: EnsembleInputs,
    iters: int = 2000,
    eta0: float | None = None,
    rng: RngLike = None,
    solver: SpectralSolverBase | None = None,
) -> MixtureWeights:
    """
    Minimizes F over the simplex by projected subgradient descent from the uniform weights.

    Args:
        inputs:
            Generator and real samples.
        iters:
            Number of subgradient steps.
        eta0:
            Initial step size; step t uses eta0 / sqrt(t). Defaults to 0.5 / max_k ||S_k||_2.
        rng:
            Random source of the spectral solver.
        solver:
            Spectral solver. Defaults to `linalg.PowerMethod()`.

    Returns:
        The best weights seen, among the iterates and their step-weighted average. The trace holds
        `(t, F(alpha_t))` for t = 0..iters, then the average's value under index iters + 1.
    """

    check_positive(iters, "iterations", integer=True)
    solver = resolve_solver(solver)
    generator = as_generator(rng)
    p = inputs.p

    def evaluate(alpha):
        return ensemble_objective(alpha, inputs, solver=solver, rng=generator)

    alpha = np.full(p, 1 / p)
    current = evaluate(alpha)
    trace = [(0, current.value)]
    if p == 1:
        return MixtureWeights([1.0], trace)

    if eta0 is None:
        scale = max(ExactSolver().spectral_norm(moment) for moment in inputs.moments)
        eta0 = 0.5 / scale if scale > 0 else 1.0
    check_positive(eta0, "eta0")

    best_alpha, best_value = alpha, current.value
    average, weight_sum = np.zeros(p), 0.0
    for t in range(1, iters + 1):
        v = current.direction
        subgradient = np.array([moment.quadratic_form(v) for moment in inputs.moments])
        subgradient *= current.sign
        if current.degenerate:
            subgradient[:] = 0
        step = eta0 / math.sqrt(t)
        alpha = simplex_project(alpha - step * subgradient)
        average += step * alpha
        weight_sum += step
        current = evaluate(alpha)
        trace.append((t, current.value))
        if current.value < best_value:
            best_alpha, best_value = alpha, current.value

    averaged = simplex_project(average / weight_sum)
    averaged_value = evaluate(averaged).value
    trace.append((iters + 1, averaged_value))
    if averaged_value < best_value:
        best_alpha, best_value = averaged, averaged_value

    Log.debug(
        lambda: f"Ensemble weights after ${iters} step$: {np.round(best_alpha, 4).tolist()}, "
        f"F = |{best_value:.6g}|.",
    )
    return MixtureWeights(best_alpha, trace)


def simplex_lattice(p: int, resolution: float) -> Types.Array:
    """All points of the simplex whose coordinates are multiples of `resolution`."""
    check_positive(p, "p", integer=True)
    check_positive(resolution, "resolution")
    steps = round(1 / resolution)
    if steps < 1 or not math.isclose(steps * resolution, 1, rel_tol=1e-9):
        raise Exceptions.ParameterError(f"1 / resolution must be an integer (got {resolution})")
    if math.comb(steps + p - 1, p - 1) > GRID_MAX_POINTS:
        raise Exceptions.OracleSizeLimit("grid size limit")
    points = []
    for bars in itertools.combinations(range(steps + p - 1), p - 1):
        edges = (-1, *bars, steps + p - 1)
        points.append([edges[k + 1] - edges[k] - 1 for k in range(p)])
    return np.array(points, dtype=np.float64) / steps


class GridResult(NamedTuple):
    alpha: MixtureWeights
    value: float


def grid_search(inputs: EnsembleInputs, resolution: float = 0.01, chunk: int = 4096) -> GridResult:
    """
    Evaluates F exactly (dense eigenvalues) at every lattice point of the simplex and returns the
    minimizer. The first minimizer in lattice order wins ties.
    """

    lattice = simplex_lattice(inputs.p, resolution)
    moments = np.stack([moment.entries for moment in inputs.moments])
    best_index, best_value = 0, math.inf
    for start in range(0, len(lattice), chunk):
        block = lattice[start : start + chunk]
        matrices = np.tensordot(block, moments, axes=1) - inputs.real_moment.entries
        values = np.max(np.abs(np.linalg.eigvalsh(matrices)), axis=1)
        index = int(np.argmin(values))
        if values[index] < best_value:
            best_index, best_value = start + index, float(values[index])
    alpha = simplex_project(lattice[best_index])
    Log.debug(f"Grid search over ${len(lattice)} point$: F = |{best_value:.6g}|.")
    return GridResult(MixtureWeights(alpha, [(0, best_value)]), best_value)


def reference_optimum(
    inputs: EnsembleInputs,
    resolution: float = 0.01,
    iters: int = 2000,
    rng: RngLike = None,
) -> MixtureWeights:
    """The better of the lattice minimizer and the subgradient solution on the same inputs."""
    grid = grid_search(inputs, resolution)
    descent = edgan_optimize(inputs, iters=iters, rng=rng)
    grid_value = _evaluate_exact(grid.alpha, inputs)
    return descent if _evaluate_exact(descent, inputs) < grid_value else grid.alpha


def _evaluate_exact(alpha: MixtureWeights, inputs: EnsembleInputs) -> float:
    return ensemble_objective(alpha, inputs, solver=ExactSolver()).value


def generalization_gap(
    train: EnsembleInputs,
    evaluation: EnsembleInputs,
    resolution: float = 0.01,
    iters: int = 2000,
    rng: RngLike = None,
    reference: MixtureWeights | None = None,
) -> float:
    """
    F_eval(alpha_hat) - F_eval(alpha_star), where alpha_hat is learned on `train` and alpha_star is
    the reference optimum on `evaluation`. Both evaluations use the exact solver.
    """
    seed = int(as_generator(rng).integers(2**32))
    learned = edgan_optimize(train, iters=iters, rng=seed)
    if reference is None:
        reference = reference_optimum(evaluation, resolution, iters, rng=seed)
    return _evaluate_exact(learned, evaluation) - _evaluate_exact(reference, evaluation)


def _draw_inputs(
    generators: Sequence[SamplerBase],
    real: SamplerBase,
    n: int,
    stream: RngStream,
) -> EnsembleInputs:
    samples = [
        sampler.reseeded(stream.derive(k)).draw(n) for k, sampler in enumerate(generators)
    ]
    return EnsembleInputs(samples, real.reseeded(stream.derive(len(generators))).draw(n))


def theorem4_probe(
    generators: Sequence[SamplerBase],
    real: SamplerBase,
    sizes: Sequence[int],
    resolution: float = 0.01,
    rng: RngLike = 0,
    repeats: int = 10,
    eval_size: int = 20000,
    iters: int = 2000,
) -> list[tuple[int, float]]:
    """
    Learns ensemble weights on fresh training samples of each size and measures, on one large
    held-out evaluation set, how much worse they are than the reference optimum of that set.

    Args:
        generators:
            Samplers of the p pre-trained generators (p <= 3 keeps the lattice small).
        real:
            Sampler of the real distribution.
        sizes:
            Training sample sizes n, per generator and for the real data.
        resolution:
            Lattice resolution of the reference optimum.
        rng:
            Seed or stream. Every (size, repeat) pair draws from its own derived stream.
        repeats:
            Independent training draws per size; the median gap is reported.
        eval_size:
            Samples per source in the evaluation set.

    Returns:
        `(n, median |gap|)` for each size, in input order.
    """

    check_positive(repeats, "repeats", integer=True)
    check_positive(eval_size, "evaluation size", integer=True)
    for n in sizes:
        check_positive(n, "sample size", integer=True)
    stream = as_stream(rng)

    evaluation = _draw_inputs(generators, real, eval_size, stream.derive(0))
    reference = reference_optimum(evaluation, resolution, iters, rng=stream.derive(1))
    results = []
    for index, n in enumerate(sizes):
        gaps = []
        for repeat in range(repeats):
            run = stream.derive(2).derive(index).derive(repeat)
            train = _draw_inputs(generators, real, n, run)
            gap = generalization_gap(train, evaluation, resolution, iters, run, reference)
            gaps.append(abs(gap))
        results.append((n, statistics.median(gaps)))
        Log.info(f"Generalization gap at n = |{n}|: median |{results[-1][1]:.4g}|.")
    return results
