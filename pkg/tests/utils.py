"""
Builders and small oracles shared by several test modules.
"""

import itertools
from pathlib import Path

import numpy as np
from discgan.datagen import SamplerBase
from discgan.linalg import SymMatrix
from discgan.neuralnet import Layer, MlpParams
from discgan.samples import SampleMatrix


def random_symmetric(dim: int, rng: np.random.Generator, scale: float = 1.0) -> SymMatrix:
    a = rng.standard_normal((dim, dim)) * scale
    return SymMatrix((a + a.T) / 2)


def random_ball_samples(n: int, dim: int, rng: np.random.Generator) -> SampleMatrix:
    """Rows drawn from a Gaussian and then squashed into the unit ball."""
    data = rng.standard_normal((n, dim)) * 0.5
    norms = np.maximum(1.0, np.linalg.norm(data, axis=1, keepdims=True))
    return SampleMatrix(data / norms, unit_ball=True)


def write_csv(path: Path, rows) -> Path:
    path.write_text("\n".join(",".join(repr(float(x)) for x in row) for row in rows) + "\n")
    return path


def scalar_net(weight: float, act: str = "identity") -> MlpParams:
    """A 1 -> 1 network computing act(weight * x)."""
    return MlpParams([Layer([[weight]], [0.0], act)])


class FixedSampler(SamplerBase):
    """Returns the first n rows of one fixed matrix on every draw."""

    def __init__(self, samples):
        self.samples = SampleMatrix.coerce(samples)
        super().__init__(self.samples.cols)

    def _draw(self, n, generator):
        assert n <= self.samples.rows
        return self.samples.data[:n]


def naive_covariance(data: np.ndarray) -> np.ndarray:
    n, d = data.shape
    out = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            for k in range(n):
                out[i, j] += data[k, i] * data[k, j]
    return out / n


def halfplane_labelings_by_sweep(points: np.ndarray, grid: int = 2000) -> np.ndarray:
    """
    Halfplane labelings of planar points found by sweeping directions: a regular angle grid plus
    the directions just beside every pairwise perpendicular, each with every threshold cut.
    """

    angles = list(np.linspace(0, 2 * np.pi, grid, endpoint=False))
    for a, b in itertools.combinations(points, 2):
        diff = b - a
        base = np.arctan2(diff[1], diff[0]) + np.pi / 2
        for offset in (-1e-7, 1e-7, np.pi - 1e-7, np.pi + 1e-7):
            angles.append(base + offset)

    labelings = [np.ones(len(points), dtype=np.int8)]
    for angle in angles:
        u = np.array([np.cos(angle), np.sin(angle)])
        projections = points @ u
        for threshold in np.unique(projections):
            labelings.append(np.where(projections >= threshold, 1, -1).astype(np.int8))
    return np.unique(np.array(labelings), axis=0)


def zero_one_disc_by_sweep(p: np.ndarray, q: np.ndarray) -> float:
    points = np.vstack([p, q])
    weights = np.concatenate([np.full(len(p), 1 / len(p)), np.full(len(q), -1 / len(q))])
    labels = halfplane_labelings_by_sweep(points).astype(np.float64)
    return min(1.0, float(np.max(np.abs(labels @ (labels * weights).T))) / 2)
