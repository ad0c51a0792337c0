"""
Likelihood metrics for the toy experiments and the finite-sample decay probe of the discrepancy.

L(S_r) is the mean log-density of the real samples under a Gaussian KDE of the generated samples,
and L(S_theta) is the mean log-density of the generated samples under the true distribution (the
analytic ring density when it is known, a KDE of the real samples otherwise).
"""

import math
from collections.abc import Sequence
from typing import Any, NamedTuple

import numpy as np
from scipy.special import logsumexp
from sklearn.model_selection import KFold
from sklearn.neighbors import KernelDensity

from .base import Exceptions, Types
from .datagen import RingSpec, SamplerBase, as_stream, ring_log_density
from .discrepancy import empirical_discrepancy
from .linalg import SpectralSolverBase
from .samples import SampleMatrix, check_same_dim
from .util import Log
from .util.typing import RngLike, as_float_matrix, as_generator, check_positive

LOG_DENSITY_FLOOR = -1e6
DEFAULT_FOLDS = 5
# The default candidate bandwidths span [0.005, 1] times the data scale, log-spaced.
DEFAULT_GRID = (0.005, 1.0, 20)
DECAY_SLOPE_BAND = (-0.7, -0.3)


class KdeModel:
    """
    A Gaussian kernel density estimate with a fixed bandwidth. Evaluation goes through
    scikit-learn's tree-based `KernelDensity` (exact at zero tolerance); points far enough from all
    kernels to underflow are re-evaluated in log space.
    """

    def __init__(self, points: SampleMatrix | Any, bandwidth: float):
        check_positive(bandwidth, "bandwidth")
        self.points = SampleMatrix.coerce(points)
        self.bandwidth = float(bandwidth)
        self._estimator = KernelDensity(kernel="gaussian", bandwidth=self.bandwidth)
        self._estimator.fit(self.points.data)

    @property
    def dim(self) -> int:
        return self.points.cols

    def _log_density_direct(self, x: Types.Array) -> Types.Array:
        h2 = self.bandwidth**2
        norm = -0.5 * self.dim * math.log(2 * math.pi * h2) - math.log(self.points.rows)
        sq_dists = np.sum((x[:, None, :] - self.points.data[None, :, :]) ** 2, axis=2)
        return logsumexp(-sq_dists / (2 * h2), axis=1) + norm

    def log_density(self, x: Any) -> Types.Array:
        """Log-density at every row of `x`."""
        x = as_float_matrix(x, name="evaluation points")
        if x.shape[1] != self.dim:
            raise Exceptions.DimensionMismatch(
                f"KDE of dimension {self.dim} evaluated at points of dimension {x.shape[1]}",
            )
        values = self._estimator.score_samples(x)
        underflow = ~np.isfinite(values)
        if np.any(underflow):
            values[underflow] = self._log_density_direct(x[underflow])
        return values

    def __repr__(self):
        return f"{self.__class__.__name__}(n={self.points.rows}, h={self.bandwidth:.4g})"


def kde_log_density(model: KdeModel, x: Any) -> float | Types.Array:
    """Log-density of a KDE at one point (a vector) or at every row of a matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return float(model.log_density(x.reshape(1, -1))[0])
    return model.log_density(x)


def _floored_mean(values: Types.Array) -> float:
    return float(np.mean(np.maximum(values, LOG_DENSITY_FLOOR)))


def data_scale(samples: SampleMatrix) -> float:
    """Root-mean-square standard deviation over the coordinates; 1 for constant data."""
    scale = float(np.sqrt(np.mean(np.var(samples.data, axis=0))))
    return scale if scale > 0 else 1.0


def default_candidates(samples: SampleMatrix) -> Types.Array:
    low, high, count = DEFAULT_GRID
    return np.logspace(math.log10(low), math.log10(high), count) * data_scale(samples)


def cv_bandwidth(
    samples: SampleMatrix | Any,
    candidates: Sequence[float] | None = None,
    folds: int = DEFAULT_FOLDS,
    rng: RngLike = None,
) -> float:
    """
    Picks the bandwidth with the highest k-fold held-out mean log-likelihood.

    Args:
        samples:
            Data to fit.
        candidates:
            Positive bandwidths to try. Defaults to 20 log-spaced values over [0.005, 1] times the
            data scale.
        folds:
            Number of folds, at least 2 and at most the number of samples.
        rng:
            Random source for the shuffled fold assignment.

    Returns:
        The best candidate. Ties go to the smallest bandwidth.
    """

    samples = SampleMatrix.coerce(samples)
    candidates = default_candidates(samples) if candidates is None else list(candidates)
    if len(candidates) == 0:
        raise Exceptions.ParameterError("no candidate bandwidths")
    for h in candidates:
        check_positive(h, "candidate bandwidth")
    if isinstance(folds, bool) or not isinstance(folds, int) or folds < 2:
        raise Exceptions.ParameterError(f"need at least 2 folds (got {folds})")
    if folds > samples.rows:
        raise Exceptions.ParameterError(f"{folds} folds for {samples.rows} samples")
    if len(candidates) == 1:
        return float(candidates[0])

    seed = int(as_generator(rng).integers(2**32))
    splits = list(KFold(n_splits=folds, shuffle=True, random_state=seed).split(samples.data))

    best_h, best_score = math.nan, -math.inf
    for h in sorted(float(h) for h in candidates):
        scores = [
            _floored_mean(KdeModel(samples.data[train], h).log_density(samples.data[test]))
            for train, test in splits
        ]
        score = float(np.mean(scores))
        Log.debug(lambda: f"Bandwidth |{h:.4g}|: held-out log-likelihood {score:.6g}.")
        if score > best_score:
            best_h, best_score = h, score
    return best_h


class LikelihoodReport(NamedTuple):
    l_sr: float
    l_stheta: float
    n_real: int
    n_generated: int
    bandwidth_generated: float
    bandwidth_real: float | None

    def as_dict(self) -> dict[str, Any]:
        return {
            "L_Sr": self.l_sr,
            "L_Stheta": self.l_stheta,
            "n_real": self.n_real,
            "n_generated": self.n_generated,
            "bandwidths": {"generated": self.bandwidth_generated, "real": self.bandwidth_real},
        }


def likelihood_report(
    real: SampleMatrix | Any,
    generated: SampleMatrix | Any,
    spec: RingSpec | None = None,
    candidates: Sequence[float] | None = None,
    folds: int = DEFAULT_FOLDS,
    rng: RngLike = None,
) -> LikelihoodReport:
    """
    Computes L(S_r) and L(S_theta). Per-point log-densities are floored at -1e6 before averaging.

    Args:
        real:
            Real samples S_r.
        generated:
            Generated samples S_theta.
        spec:
            If given, the true density is this ring's analytic density instead of a KDE of `real`.
        candidates, folds:
            Passed to `cv_bandwidth()` for every KDE.
        rng:
            Random source of the fold assignments. Both KDEs use the same fold seed.
    """

    real, generated = SampleMatrix.coerce(real), SampleMatrix.coerce(generated)
    check_same_dim(real, generated)
    seed = int(as_generator(rng).integers(2**32))

    h_generated = cv_bandwidth(generated, candidates, folds, rng=seed)
    l_sr = _floored_mean(KdeModel(generated, h_generated).log_density(real.data))

    if spec is not None:
        h_real = None
        l_stheta = _floored_mean(np.asarray(ring_log_density(spec, generated.data)))
    else:
        h_real = cv_bandwidth(real, candidates, folds, rng=seed)
        l_stheta = _floored_mean(KdeModel(real, h_real).log_density(generated.data))

    Log.info(f"Likelihoods: L(S_r) = |{l_sr:.4f}|, L(S_theta) = |{l_stheta:.4f}|.")
    return LikelihoodReport(l_sr, l_stheta, real.rows, generated.rows, h_generated, h_real)


class DecayResult(NamedTuple):
    slope: float | None
    intercept: float | None
    sizes: list[int]
    means: list[float]

    @property
    def within_band(self) -> bool:
        low, high = DECAY_SLOPE_BAND
        return self.slope is not None and low <= self.slope <= high

    def as_dict(self) -> dict[str, Any]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "points": [{"n": n, "disc": disc} for n, disc in zip(self.sizes, self.means)],
            "within_band": self.within_band,
        }


def decay_probe(
    sampler: SamplerBase,
    sizes: Sequence[int],
    repeats: int = 10,
    rng: RngLike = 0,
    solver: SpectralSolverBase | None = None,
) -> DecayResult:
    """
    Fits the slope of log E[disc] against log n, where disc is the empirical discrepancy between
    two independent size-n samples of one distribution. Its population value is 0, so the mean
    measures pure estimation error, which should decay like n^(-1/2).

    Args:
        sampler:
            The distribution. It is reseeded per draw, so its own stream is left untouched.
        sizes:
            At least four distinct sample sizes, typically a geometric sequence.
        repeats:
            Independent pairs per size (at least five).
        rng:
            Seed or stream; draw (size i, repeat r, side s) uses the derived stream (i, r, s).
    """

    sizes = [int(n) for n in sizes]
    if len(set(sizes)) < 4:
        raise Exceptions.ParameterError("the decay probe needs at least 4 distinct sample sizes")
    for n in sizes:
        check_positive(n, "sample size", integer=True)
    if isinstance(repeats, bool) or not isinstance(repeats, int) or repeats < 5:
        raise Exceptions.ParameterError(f"the decay probe needs at least 5 repeats (got {repeats})")
    stream = as_stream(rng)

    means = []
    for index, n in enumerate(sizes):
        values = []
        for repeat in range(repeats):
            run = stream.derive(index).derive(repeat)
            first = sampler.reseeded(run.derive(0)).draw(n)
            second = sampler.reseeded(run.derive(1)).draw(n)
            disc = empirical_discrepancy(first, second, solver=solver, rng=run.derive(2))
            values.append(disc.value)
        means.append(float(np.mean(values)))
        Log.debug(f"Mean discrepancy at n = |{n}|: {means[-1]:.4e}.")

    if min(means) <= 0:
        Log.warn("Mean discrepancy vanished at some sample size; no slope fitted.")
        return DecayResult(None, None, sizes, means)
    slope, intercept = np.polyfit(np.log(sizes), np.log(means), 1)
    Log.info(f"Discrepancy decay slope: |{slope:.3f}|.")
    return DecayResult(float(slope), float(intercept), sizes, means)
