"""
Toy data: the Gaussian ring, latent noise, mode-limited base samplers, mixtures of samplers, and
the seeded random streams all of them draw from.

Every random draw in the package comes from numpy's PCG64 bit generator, seeded through
`numpy.random.SeedSequence`. Identical seeds give identical sequences on every platform numpy
supports.
"""

import copy
import dataclasses
import math
from collections.abc import Sequence
from typing import Any

import numpy as np
from scipy.special import logsumexp

from .base import Exceptions, Types
from .samples import SampleMatrix, load_samples, save_samples
from .util import Log
from .util.typing import as_float_matrix, check_positive


@dataclasses.dataclass(frozen=True)
class RingSpec:
    """An equal-weight mixture of `p` isotropic Gaussians centered on a circle."""

    p: int = 9
    radius: float = 1.0
    sigma: float = 0.05

    def __post_init__(self):
        self.validate()

    def validate(self):
        check_positive(self.p, "number of ring components", integer=True)
        check_positive(self.radius, "ring radius")
        check_positive(self.sigma, "ring component std")

    @property
    def means(self) -> Types.Array:
        angles = 2 * np.pi * np.arange(self.p) / self.p
        return self.radius * np.column_stack([np.cos(angles), np.sin(angles)])

    @property
    def bound(self) -> float:
        """Default scale for mapping ring samples into the unit ball (radius plus four stds)."""
        return self.radius + 4 * self.sigma


class RngStream:
    """
    A named, seeded random stream. `derive()` creates independent child streams from fixed
    offsets, so that sub-tasks get reproducible randomness no matter in which order they run.
    A single stream must not be shared between threads.
    """

    seed: int
    key: tuple[int, ...]
    counter: int

    def __init__(self, seed: int, key: Sequence[int] = ()):
        if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
            raise Exceptions.ParameterError(f"seed must be a non-negative integer (got {seed})")
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        self.counter = 0
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self._generator = np.random.Generator(np.random.PCG64(sequence))

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def derive(self, offset: int) -> "RngStream":
        return RngStream(self.seed, (*self.key, offset))

    def count(self, draws: int):
        """Advances the draw counter; samplers call this with the number of samples they drew."""
        self.counter += draws

    def __repr__(self):
        return f"{self.__class__.__name__}({self.seed}, key={self.key}, counter={self.counter})"


def as_stream(rng: Any) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(0)
    return RngStream(rng)


def rescale_to_unit_ball(samples: SampleMatrix | Any, bound: float) -> SampleMatrix:
    """
    Divides every sample by the global constant `bound`. The few rows that still fall outside the
    unit ball (far Gaussian tails) are pulled back onto the sphere.
    """

    check_positive(bound, "bound")
    data = SampleMatrix.coerce(samples).data / bound
    norms = np.linalg.norm(data, axis=1)
    outside = norms > 1
    if np.any(outside):
        Log.debug(f"Clamped ${int(np.sum(outside))} sample$ onto the unit sphere.")
        data = data.copy()
        data[outside] /= norms[outside, None]
    return SampleMatrix(data, unit_ball=True)


class SamplerBase:
    """
    Base class for samplers. A sampler owns its random stream and produces sample matrices of a
    fixed dimension. Any sampler implementation must provide `_draw()`.
    """

    stream: RngStream
    dim: int
    bound: float | None

    def __init__(self, dim: int, rng: Any = None, bound: float | None = None):
        """
        Args:
            dim:
                Dimension of each sample.
            rng:
                Seed or stream. The sampler keeps using the same stream across calls.
            bound:
                If given, samples are divided by this constant and clamped into the unit ball.
        """
        self.dim = dim
        self.stream = as_stream(rng)
        self.bound = bound
        if bound is not None:
            check_positive(bound, "bound")

    def _draw(self, n: int, generator: np.random.Generator) -> Types.Array:
        raise NotImplementedError()

    @property
    def unit_ball(self) -> bool:
        """Whether every drawn sample is guaranteed to lie in the unit ball."""
        return self.bound is not None

    def draw(self, n: int) -> SampleMatrix:
        check_positive(n, "sample count", integer=True)
        data = self._draw(n, self.stream.generator)
        self.stream.count(n)
        if self.bound is not None:
            return rescale_to_unit_ball(data, self.bound)
        return SampleMatrix(data, unit_ball=self.unit_ball)

    def reseeded(self, rng: Any) -> "SamplerBase":
        """A copy of this sampler that draws from the given stream instead."""
        clone = copy.copy(self)
        clone.stream = as_stream(rng)
        return clone

    def __repr__(self):
        return f"{self.__class__.__name__}(dim={self.dim})"


class ModeLimitedSampler(SamplerBase):
    """
    Samples the ring, restricted to a subset of its components, chosen uniformly. A `spread` above 1
    widens every component by that factor, which models a generator that found its modes but
    blurs them.
    """

    def __init__(
        self,
        spec: RingSpec,
        modes: Sequence[int] | None = None,
        rng: Any = None,
        bound: float | None = None,
        spread: float = 1.0,
    ):
        super().__init__(2, rng, bound)
        check_positive(spread, "spread")
        modes = list(range(spec.p)) if modes is None else sorted(set(modes))
        if len(modes) == 0:
            raise Exceptions.ParameterError("mode subset must not be empty")
        if any(mode < 0 or mode >= spec.p for mode in modes):
            raise Exceptions.ParameterError(f"modes must lie in [0, {spec.p}) (got {modes})")
        self.spec = spec
        self.modes = tuple(modes)
        self.spread = spread

    def _draw(self, n, generator):
        components = np.asarray(self.modes)[generator.integers(0, len(self.modes), n)]
        noise = generator.standard_normal((n, 2))
        return self.spec.means[components] + self.spread * self.spec.sigma * noise

    def __repr__(self):
        if self.spread != 1:
            return f"{self.__class__.__name__}(modes={list(self.modes)}, spread={self.spread})"
        return f"{self.__class__.__name__}(modes={list(self.modes)})"


class RingSampler(ModeLimitedSampler):
    """Samples the full ring."""

    def __init__(self, spec: RingSpec, rng: Any = None, bound: float | None = None):
        super().__init__(spec, None, rng, bound)


class GaussianSampler(SamplerBase):
    """Isotropic Gaussian N(mean, std^2 I)."""

    def __init__(
        self,
        dim: int,
        std: float = 1.0,
        mean: Any = None,
        rng: Any = None,
        bound: float | None = None,
    ):
        check_positive(dim, "dimension", integer=True)
        check_positive(std, "std")
        super().__init__(dim, rng, bound)
        self.std = std
        self.mean = np.zeros(dim) if mean is None else np.asarray(mean, dtype=np.float64)
        if self.mean.shape != (dim,):
            raise Exceptions.DimensionMismatch(f"mean must have length {dim}")

    def _draw(self, n, generator):
        return self.mean + self.std * generator.standard_normal((n, self.dim))


class NoiseSampler(GaussianSampler):
    """Standard normal latent noise for generator networks."""

    def __init__(self, dim: int = 2, rng: Any = None):
        super().__init__(dim, 1.0, None, rng)


class EmpiricalSampler(SamplerBase):
    """Resamples the rows of a fixed sample matrix uniformly, with replacement."""

    def __init__(self, samples: SampleMatrix | Any, rng: Any = None):
        self.samples = SampleMatrix.coerce(samples)
        super().__init__(self.samples.cols, rng)

    @property
    def unit_ball(self) -> bool:
        return self.samples.unit_ball

    def _draw(self, n, generator):
        return self.samples.data[generator.integers(0, self.samples.rows, n)]

    def __repr__(self):
        return f"{self.__class__.__name__}({self.samples.rows}x{self.samples.cols})"


class MixtureSampler(SamplerBase):
    """
    Samples a mixture of samplers: each sample picks a component from the multinomial
    distribution with parameter `alpha` and is then drawn from that component. Components draw
    from their own streams, this sampler's stream only decides the assignment.
    """

    def __init__(
        self,
        samplers: Sequence[SamplerBase],
        alpha: Any,
        rng: Any = None,
    ):
        if len(samplers) == 0:
            raise Exceptions.ParameterError("a mixture needs at least one sampler")
        dims = {sampler.dim for sampler in samplers}
        if len(dims) != 1:
            raise Exceptions.DimensionMismatch(f"mixture components have differing dims {dims}")
        alpha = np.asarray(alpha, dtype=np.float64).reshape(-1)
        if alpha.shape[0] != len(samplers):
            raise Exceptions.DimensionMismatch("need one mixture weight per sampler")
        if np.any(alpha < 0) or not math.isclose(float(alpha.sum()), 1.0, abs_tol=1e-9):
            raise Exceptions.ParameterError("mixture weights must be non-negative and sum to 1")
        super().__init__(dims.pop(), rng)
        self.samplers = list(samplers)
        self.alpha = alpha / alpha.sum()

    def _draw(self, n, generator):
        counts = generator.multinomial(n, self.alpha)
        parts = [
            sampler.draw(int(count)).data
            for sampler, count in zip(self.samplers, counts)
            if count > 0
        ]
        return np.vstack(parts)[generator.permutation(n)]

    @property
    def unit_ball(self) -> bool:
        return all(sampler.unit_ball for sampler in self.samplers)

    def reseeded(self, rng: Any) -> "MixtureSampler":
        stream = as_stream(rng)
        clone = super().reseeded(stream.derive(0))
        clone.samplers = [
            sampler.reseeded(stream.derive(k + 1)) for k, sampler in enumerate(self.samplers)
        ]
        return clone


def sample_ring(spec: RingSpec, n: int, rng: Any = None) -> SampleMatrix:
    """Draws `n` unclipped samples from the full ring."""
    return RingSampler(spec, rng).draw(n)


def mode_limited_sampler(
    spec: RingSpec,
    modes: Sequence[int],
    rng: Any = None,
    bound: float | None = None,
    spread: float = 1.0,
) -> ModeLimitedSampler:
    return ModeLimitedSampler(spec, modes, rng, bound, spread)


def ring_log_density(spec: RingSpec, x: Any) -> float | Types.Array:
    """
    Log-density of the ring at a point, or at every row of a matrix of points. Stable for points
    far from all components.
    """

    points = np.asarray(x, dtype=np.float64)
    single = points.ndim == 1
    points = as_float_matrix(points.reshape(1, -1) if single else points, name="points")
    if points.shape[1] != 2:
        raise Exceptions.DimensionMismatch("ring density is defined on the plane")
    variance = spec.sigma**2
    sq_dists = np.sum((points[:, None, :] - spec.means[None, :, :]) ** 2, axis=2)
    log_terms = -sq_dists / (2 * variance) - np.log(2 * np.pi * variance)
    density = logsumexp(log_terms, axis=1) - np.log(spec.p)
    return float(density[0]) if single else density


__all__ = (
    "EmpiricalSampler",
    "GaussianSampler",
    "MixtureSampler",
    "ModeLimitedSampler",
    "NoiseSampler",
    "RingSampler",
    "RingSpec",
    "RngStream",
    "SampleMatrix",
    "SamplerBase",
    "as_stream",
    "load_samples",
    "mode_limited_sampler",
    "rescale_to_unit_ball",
    "ring_log_density",
    "sample_ring",
    "save_samples",
)
