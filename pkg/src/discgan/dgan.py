"""
Discrepancy GAN training. The generator g minimizes, and the embedding network f maximizes,

    F = || (1/n) f(g(Z))^T f(g(Z)) - (1/m) f(X)^T f(X) ||_2,

which is half of the squared-loss discrepancy between the embedded batches. Gradients treat the
dominant eigenvector v of the matrix inside the norm as constant, so that F = s v^T M v with
s = sign(v^T M v) differentiates like a quadratic form.
"""

import dataclasses
import math
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from .base import Exceptions, Types
from .datagen import NoiseSampler, RngStream, SamplerBase, as_stream
from .discrepancy import cov_diff
from .linalg import SpectralSolverBase, resolve_solver, solver_by_name
from .neuralnet import (
    GradBuffer,
    MlpParams,
    OptimizerState,
    apply_update,
    backward,
    clip_weights,
    forward,
    init_embedding,
    init_generator,
)
from .samples import SampleMatrix
from .util import Log
from .util.serialization import write_jsonl
from .util.typing import RngLike, as_float_matrix, as_generator, check_positive


@dataclasses.dataclass
class DganConfig:
    """
    Knobs of the training loop. Call `validate()` before use; `dgan_train()` does so itself.

    `critic_steps` embedding ascent steps precede every generator descent step, each on fresh
    batches. The first `warmup_steps` generator steps get `warmup_critic_steps` ascent steps
    instead, so the embedding separates the samples before the generator starts to move. With
    `alternating=False`, both networks are instead updated from one shared loss evaluation per
    step and there is no warm-up. With `train_embedding=False`, the embedding stays at its initial
    value.
    """

    m: int = 256
    n: int = 256
    lr: float = 1e-3
    critic_steps: int = 3
    warmup_steps: int = 25
    warmup_critic_steps: int = 100
    clip: float = 0.5
    steps: int = 1000
    embed_dim: int = 8
    seed: int = 0
    optimizer: Types.OptimizerKind = "adam"
    latent_dim: int = 2
    data_dim: int = 2
    train_embedding: bool = True
    alternating: bool = True
    solver: Types.SolverName = "power"
    log_every: int = 100

    def validate(self) -> "DganConfig":
        check_positive(self.m, "real batch size", integer=True)
        check_positive(self.n, "generated batch size", integer=True)
        if min(self.m, self.n) < 2:
            raise Exceptions.ParameterError(f"batch sizes must be at least 2 ({self.m}, {self.n})")
        check_positive(self.lr, "learning rate", allow_zero=True)
        check_positive(self.critic_steps, "critic steps", integer=True)
        check_positive(self.warmup_steps, "warm-up steps", integer=True, allow_zero=True)
        check_positive(self.warmup_critic_steps, "warm-up critic steps", integer=True)
        check_positive(self.clip, "clip constant")
        check_positive(self.steps, "steps", integer=True)
        check_positive(self.embed_dim, "embedding dimension", integer=True)
        check_positive(self.latent_dim, "latent dimension", integer=True)
        check_positive(self.data_dim, "data dimension", integer=True)
        check_positive(self.log_every, "log interval", integer=True)
        check_positive(self.seed, "seed", integer=True, allow_zero=True)
        if self.optimizer not in ("sgd", "adam"):
            raise Exceptions.ParameterError(f"unknown optimizer '{self.optimizer}'")
        solver_by_name(self.solver)
        return self


class TraceRecord(NamedTuple):
    step: int
    F: float
    converged: bool
    generator_norm: float
    embedding_norm: float

    def as_jsonl_record(self) -> dict[str, Any]:
        return {"step": self.step, "F": self.F, "converged": self.converged}


class TrainTrace:
    """One record per executed training step."""

    def __init__(self, records: Sequence[TraceRecord] = ()):
        self.records: list[TraceRecord] = list(records)

    def append(self, record: TraceRecord):
        self.records.append(record)

    @property
    def values(self) -> Types.Array:
        return np.array([record.F for record in self.records])

    def as_jsonl_records(self):
        for record in self.records:
            yield record.as_jsonl_record()

    def write_jsonl(self, path: str | Path):
        write_jsonl(self.as_jsonl_records(), path)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, index):
        return self.records[index]

    def __repr__(self):
        return f"{self.__class__.__name__}({len(self)} steps)"


class LossAndGrads(NamedTuple):
    value: float
    embedding_grads: GradBuffer
    generator_grads: GradBuffer
    converged: bool
    degenerate: bool
    direction: Types.Array | None


class TrainResult(NamedTuple):
    generator: MlpParams
    embedding: MlpParams
    trace: TrainTrace


def dgan_loss_and_grads(
    embedding: MlpParams,
    generator: MlpParams,
    real_batch: SampleMatrix | Any,
    z_batch: SampleMatrix | Any,
    solver: SpectralSolverBase | None = None,
    rng: RngLike = None,
) -> LossAndGrads:
    """
    Evaluates F on one pair of batches, with its gradients with respect to both networks.

    Args:
        embedding:
            The embedding network f.
        generator:
            The generator network g.
        real_batch:
            m real samples.
        z_batch:
            n latent vectors, fed through g.
        solver:
            Spectral solver for the dominant eigenpair. Non-convergence is reported, not raised.
        rng:
            Random source of the solver's start vector.

    Returns:
        F and the gradients of F (not of -F) for both networks. When the matrix inside the norm
        vanishes, the gradients are zero. If any embedding is non-finite, F is NaN.
    """

    real = SampleMatrix.coerce(real_batch).data
    z = as_float_matrix(z_batch, name="latent batch")
    if real.shape[0] == 0 or z.shape[0] == 0:
        raise Exceptions.EmptySample()
    if embedding.in_dim != generator.out_dim or embedding.in_dim != real.shape[1]:
        raise Exceptions.DimensionMismatch(
            f"embedding expects {embedding.in_dim} inputs, generator makes {generator.out_dim} and "
            f"the real data has {real.shape[1]}",
        )

    embedded_real, real_tape = forward(embedding, real)
    generated, generator_tape = forward(generator, z)
    embedded_fake, fake_tape = forward(embedding, generated)

    zero_embedding = GradBuffer.zeros_like(embedding)
    zero_generator = GradBuffer.zeros_like(generator)
    if not (np.all(np.isfinite(embedded_real)) and np.all(np.isfinite(embedded_fake))):
        return LossAndGrads(math.nan, zero_embedding, zero_generator, False, False, None)

    pair = resolve_solver(solver).dominant(cov_diff(embedded_real, embedded_fake), rng=rng)
    value = abs(pair.value)
    if pair.degenerate or value == 0:
        return LossAndGrads(0.0, zero_embedding, zero_generator, pair.converged, True, pair.vector)

    sign = 1.0 if pair.value >= 0 else -1.0
    v = pair.vector
    m, n = embedded_real.shape[0], embedded_fake.shape[0]
    d_fake = sign * (2 / n) * np.outer(embedded_fake @ v, v)
    d_real = -sign * (2 / m) * np.outer(embedded_real @ v, v)

    grads_real, _ = backward(embedding, real_tape, d_real)
    grads_fake, d_generated = backward(embedding, fake_tape, d_fake)
    grads_generator, _ = backward(generator, generator_tape, d_generated)
    return LossAndGrads(value, grads_real + grads_fake, grads_generator, pair.converged, False, v)


def init_models(cfg: DganConfig) -> tuple[MlpParams, MlpParams]:
    """
    The generator and the (clipped) embedding that `dgan_train()` starts from when no initial
    networks are given.
    """
    stream = RngStream(cfg.seed)
    generator = init_generator(stream.derive(0), latent_dim=cfg.latent_dim, out_dim=cfg.data_dim)
    embedding = init_embedding(cfg.embed_dim, stream.derive(1), in_dim=cfg.data_dim)
    return generator, clip_weights(embedding, cfg.clip)


def dgan_train(
    cfg: DganConfig,
    real_sampler: SamplerBase,
    noise_sampler: SamplerBase | None = None,
    generator: MlpParams | None = None,
    embedding: MlpParams | None = None,
    on_step: Callable[[TraceRecord], Any] | None = None,
) -> TrainResult:
    """
    Runs `cfg.steps` training steps.

    Args:
        cfg:
            Training configuration.
        real_sampler:
            Source of real batches.
        noise_sampler:
            Source of latent batches. Defaults to standard normal noise seeded from `cfg.seed`.
        generator, embedding:
            Initial networks. Default to `init_models(cfg)`. A given embedding is clipped first.
        on_step:
            Called with every trace record as soon as its step has finished, e.g. to stream the
            trace to disk while training runs.

    Raises:
        Exceptions.NumericalAbort: F became non-finite. The exception carries the step number and
            the trace up to that step.
    """

    cfg.validate()
    stream = RngStream(cfg.seed)
    default_generator, default_embedding = init_models(cfg)
    generator = default_generator if generator is None else generator
    embedding = clip_weights(default_embedding if embedding is None else embedding, cfg.clip)
    if noise_sampler is None:
        noise_sampler = NoiseSampler(generator.in_dim, stream.derive(2))
    solver = solver_by_name(cfg.solver)
    solver_stream = stream.derive(3)

    opt_embedding = OptimizerState(cfg.optimizer, cfg.lr)
    opt_generator = OptimizerState(cfg.optimizer, cfg.lr)
    trace = TrainTrace()

    def evaluate(step: int) -> LossAndGrads:
        result = dgan_loss_and_grads(
            embedding,
            generator,
            real_sampler.draw(cfg.m),
            noise_sampler.draw(cfg.n).data,
            solver=solver,
            rng=solver_stream,
        )
        if not math.isfinite(result.value) or not (
            result.embedding_grads.is_finite() and result.generator_grads.is_finite()
        ):
            Log.fail(f"Non-finite loss at step |{step}|; aborting.")
            raise Exceptions.NumericalAbort(f"non-finite loss at step {step}", step, trace)
        return result

    critic_steps = cfg.critic_steps if cfg.alternating and cfg.train_embedding else 0
    warmup = min(cfg.warmup_steps, cfg.steps) if critic_steps else 0
    Log.info(
        f"![DGAN] Training for ${cfg.steps} step$ (${critic_steps} critic step$ each, "
        f"${cfg.warmup_critic_steps} critic step$ for the first ${warmup} step$), batches "
        f"|{cfg.m}|/|{cfg.n}|, optimizer |{cfg.optimizer}|, lr |{cfg.lr}|.",
    )
    unconverged = 0
    with Log.timed("DGAN training", level="info"):
        for step in range(1, cfg.steps + 1):
            try:
                if cfg.alternating:
                    if cfg.train_embedding:
                        ascents = cfg.warmup_critic_steps if step <= warmup else cfg.critic_steps
                        for _ in range(ascents):
                            result = evaluate(step)
                            embedding, opt_embedding = apply_update(
                                embedding, result.embedding_grads, opt_embedding, +1
                            )
                            embedding = clip_weights(embedding, cfg.clip)
                    result = evaluate(step)
                    generator, opt_generator = apply_update(
                        generator, result.generator_grads, opt_generator, -1
                    )
                else:
                    result = evaluate(step)
                    if cfg.train_embedding:
                        embedding, opt_embedding = apply_update(
                            embedding, result.embedding_grads, opt_embedding, +1
                        )
                        embedding = clip_weights(embedding, cfg.clip)
                    generator, opt_generator = apply_update(
                        generator, result.generator_grads, opt_generator, -1
                    )
            except Exceptions.NonFiniteValue as error:
                Log.fail(f"Non-finite parameters at step |{step}|; aborting.")
                raise Exceptions.NumericalAbort(
                    f"non-finite parameters at step {step}", step, trace
                ) from error

            unconverged += not result.converged
            record = TraceRecord(
                step, result.value, result.converged, generator.norm(), embedding.norm(),
            )
            trace.append(record)
            if on_step is not None:
                on_step(record)
            if step % cfg.log_every == 0 or step == cfg.steps:
                Log.info(f"Step |{step}|/{cfg.steps}: F = |{result.value:.6g}|.")

    if unconverged:
        Log.warn(f"Eigen solver did not converge in ${unconverged} step$.")
    return TrainResult(generator, embedding, trace)


class NetworkSampler(SamplerBase):
    """Samples a generator network by feeding it latent noise."""

    def __init__(self, generator: MlpParams, noise_sampler: SamplerBase | None = None, rng=None):
        noise_sampler = noise_sampler or NoiseSampler(generator.in_dim, as_stream(rng))
        if noise_sampler.dim != generator.in_dim:
            raise Exceptions.DimensionMismatch("noise dimension does not match the generator")
        super().__init__(generator.out_dim, noise_sampler.stream)
        self.generator = generator
        self.noise_sampler = noise_sampler

    @property
    def unit_ball(self) -> bool:
        return self.generator.layers[-1].act == "ball"

    def reseeded(self, rng) -> "NetworkSampler":
        noise = self.noise_sampler.reseeded(rng)
        return NetworkSampler(self.generator, noise)

    def _draw(self, n, generator):
        outputs, _ = forward(self.generator, self.noise_sampler.draw(n).data)
        return outputs


def _random_unit_direction(size: int, rng: RngLike) -> Types.Array:
    direction = as_generator(rng).standard_normal(size)
    return direction / np.linalg.norm(direction)


def continuity_probe(
    generator: MlpParams,
    embedding: MlpParams,
    real: SampleMatrix | Any,
    z: SampleMatrix | Any,
    epsilons: Sequence[float],
    direction: Any = None,
    rng: RngLike = None,
    solver: SpectralSolverBase | None = None,
) -> list[tuple[float, float]]:
    """
    Measures |F(theta + eps * delta) - F(theta)| along one unit direction delta in the generator's
    parameter space, with the batches held fixed.

    Args:
        epsilons:
            Non-negative and non-increasing step sizes.
        direction:
            The direction delta, normalized before use. Random if omitted.
        rng:
            Random source for the direction. Every evaluation of F reuses one fixed solver seed,
            so eps = 0 gives a gap of exactly 0.

    Returns:
        One `(eps, gap)` pair per step size, in input order.
    """

    epsilons = [float(eps) for eps in epsilons]
    if any(eps < 0 or not math.isfinite(eps) for eps in epsilons):
        raise Exceptions.ParameterError("step sizes must be finite and non-negative")
    if any(later > earlier for earlier, later in zip(epsilons, epsilons[1:])):
        raise Exceptions.ParameterError("step sizes must be non-increasing")

    theta = generator.flatten()
    if direction is None:
        delta = _random_unit_direction(theta.size, rng)
    else:
        delta = np.asarray(direction, dtype=np.float64).reshape(-1)
        if delta.size != theta.size or not np.any(delta):
            raise Exceptions.DimensionMismatch(
                f"direction must be a non-zero vector of length {theta.size}",
            )
        delta = delta / np.linalg.norm(delta)
    solver = resolve_solver(solver)

    def objective(params: MlpParams) -> float:
        return dgan_loss_and_grads(embedding, params, real, z, solver=solver, rng=0).value

    base = objective(generator)
    results = []
    for eps in epsilons:
        gap = abs(objective(generator.unflatten(theta + eps * delta)) - base)
        results.append((eps, gap))
    Log.debug(lambda: "Continuity gaps: " + ", ".join(f"|{e:.0e}|: {g:.3e}" for e, g in results))
    return results


def gaps_nonincreasing(results: Sequence[tuple[float, float]], slack: float = 1e-9) -> bool:
    """Whether the gaps shrink (up to `slack`) as the step sizes shrink."""
    gaps = [gap for _, gap in results]
    return all(later <= earlier + slack for earlier, later in zip(gaps, gaps[1:]))
