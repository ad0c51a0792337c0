"""
The ring ensemble experiment: a few base generators that each cover only some modes of a Gaussian
ring, and blur them by differing amounts, are mixed once uniformly and once with learned ensemble
weights. Every single generator and both mixtures are scored by discrepancy and by the two
likelihood metrics.
"""

from collections.abc import Sequence
from typing import Any, NamedTuple

import numpy as np

from .base import Exceptions
from .datagen import MixtureSampler, ModeLimitedSampler, RingSampler, RingSpec, as_stream
from .discrepancy import empirical_discrepancy
from .edgan import EnsembleInputs, MixtureWeights, edgan_optimize
from .evaluation import likelihood_report
from .linalg import SpectralSolverBase
from .util import Log
from .util.typing import RngLike, check_positive

DEFAULT_MODE_SETS = ((0, 1, 2, 3, 4), (2, 3, 4, 5, 6), (4, 5, 6, 7, 8), (6, 7, 8, 0), (8, 0, 1, 2))
# Base generators of uneven quality; the sharp ones (the first three) cover every mode between them.
DEFAULT_SPREADS = (1.0, 1.5, 2.0, 3.0, 4.0)


class ToyRow(NamedTuple):
    name: str
    alpha: list[float]
    disc: float
    l_sr: float
    l_stheta: float

    def as_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "alpha": self.alpha,
            "disc": self.disc,
            "L_Sr": self.l_sr,
            "L_Stheta": self.l_stheta,
        }


class ToyReport(NamedTuple):
    rows: list[ToyRow]
    weights: MixtureWeights

    def row(self, name: str) -> ToyRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    @property
    def singles(self) -> list[ToyRow]:
        return [row for row in self.rows if row.name.startswith("single")]

    def as_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.weights.alpha.tolist(),
            "objective": self.weights.objective,
            "rows": [row.as_dict() for row in self.rows],
        }


def ensemble_experiment(
    spec: RingSpec | None = None,
    mode_sets: Sequence[Sequence[int]] = DEFAULT_MODE_SETS,
    spreads: Sequence[float] | None = DEFAULT_SPREADS,
    n: int = 1000,
    eval_size: int = 1000,
    iters: int = 500,
    rng: RngLike = 0,
    solver: SpectralSolverBase | None = None,
) -> ToyReport:
    """
    Runs the ring ensemble experiment once.

    Discrepancies are computed on samples scaled into the unit ball by `spec.bound`; likelihoods
    are computed in the ring's own coordinates, with the analytic ring density as the truth.

    Args:
        spec:
            The ring. Defaults to `RingSpec()`.
        mode_sets:
            Components covered by each base generator.
        spreads:
            Component width of each base generator, relative to the ring's. `None` makes every
            base generator exact on its modes.
        n:
            Training samples per generator (and of the ring) for learning the weights.
        eval_size:
            Fresh samples per row (and of the ring) for scoring.
        iters:
            Subgradient steps of the weight optimization.
        rng:
            Seed or stream. Training draws, evaluation draws and the KDE folds use separate derived
            streams.
        solver:
            Spectral solver for the weights and the discrepancies.
    """

    spec = spec or RingSpec()
    check_positive(n, "training sample size", integer=True)
    check_positive(eval_size, "evaluation sample size", integer=True)
    stream = as_stream(rng)
    if spreads is None:
        spreads = [1.0] * len(mode_sets)
    if len(spreads) != len(mode_sets):
        raise Exceptions.ParameterError(
            f"got {len(spreads)} spreads for {len(mode_sets)} base generators",
        )
    bases = [
        ModeLimitedSampler(spec, modes, bound=spec.bound, spread=spread)
        for modes, spread in zip(mode_sets, spreads)
    ]
    ring = RingSampler(spec, bound=spec.bound)
    p = len(bases)

    train_stream = stream.derive(0)
    inputs = EnsembleInputs(
        [base.reseeded(train_stream.derive(k)).draw(n) for k, base in enumerate(bases)],
        ring.reseeded(train_stream.derive(p)).draw(n),
    )
    with Log.timed("Ensemble weight learning", level="info"):
        weights = edgan_optimize(inputs, iters=iters, rng=stream.derive(1), solver=solver)
    Log.info(f"Learned ensemble weights {np.round(weights.alpha, 3).tolist()}.")

    candidates = [(f"single_{k + 1}", np.eye(p)[k]) for k in range(p)]
    candidates.append(("uniform", MixtureWeights.uniform(p).alpha))
    candidates.append(("edgan", weights.alpha))

    real = ring.reseeded(stream.derive(2)).draw(eval_size)
    kde_seed = int(stream.derive(3).generator.integers(2**32))
    rows = []
    for index, (name, alpha) in enumerate(candidates):
        mixture = MixtureSampler(bases, alpha).reseeded(stream.derive(4).derive(index))
        generated = mixture.draw(eval_size)
        disc = empirical_discrepancy(real, generated, solver=solver, rng=stream.derive(5))
        report = likelihood_report(
            real.scaled(spec.bound), generated.scaled(spec.bound), spec=spec, rng=kde_seed,
        )
        alpha = np.asarray(alpha).tolist()
        rows.append(ToyRow(name, alpha, disc.value, report.l_sr, report.l_stheta))
        Log.debug(
            f"Row |{name}|: disc {disc.value:.4g}, L(S_r) {report.l_sr:.4f}, "
            f"L(S_theta) {report.l_stheta:.4f}.",
        )
    return ToyReport(rows, weights)
