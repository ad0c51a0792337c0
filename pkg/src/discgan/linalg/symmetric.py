import dataclasses
from typing import Any

import numpy as np

from ..base import Exceptions, Types
from ..samples import SampleMatrix
from ..util import Log
from ..util.typing import as_float_matrix

SYMMETRY_TOLERANCE = 1e-12
ORACLE_MAX_DIM = 64


class SymMatrix:
    """
    A dense, real, symmetric matrix. Construction checks that the input is square, finite, and
    symmetric up to `SYMMETRY_TOLERANCE` (absolute), and then stores the exact average of the input
    and its transpose, so that the stored entries are symmetric bit for bit.
    """

    _entries: Types.Array

    def __init__(self, entries: Any):
        array = as_float_matrix(entries, name="symmetric matrix")
        if array.shape[0] != array.shape[1]:
            raise Exceptions.DimensionMismatch(f"symmetric matrix must be square ({array.shape})")
        if array.shape[0] == 0:
            raise Exceptions.DimensionMismatch("symmetric matrix must have dim >= 1")
        if not np.all(np.isfinite(array)):
            raise Exceptions.NonFiniteValue("symmetric matrix has non-finite entries")
        asymmetry = float(np.max(np.abs(array - array.T)))
        if asymmetry > SYMMETRY_TOLERANCE:
            raise Exceptions.AsymmetricMatrix(
                f"matrix is not symmetric (max |A - A^T| = {asymmetry:.3g})",
            )
        symmetric = (array + array.T) / 2
        symmetric.setflags(write=False)
        self._entries = symmetric

    @classmethod
    def coerce(cls, obj: Any) -> "SymMatrix":
        if isinstance(obj, SymMatrix):
            return obj
        return cls(obj)

    @property
    def entries(self) -> Types.Array:
        return self._entries

    @property
    def dim(self) -> int:
        return self._entries.shape[0]

    def is_zero(self) -> bool:
        return not np.any(self._entries)

    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.linalg.norm(self._entries))

    def quadratic_form(self, vector: Any) -> float:
        vector = np.asarray(vector, dtype=np.float64)
        return float(vector @ self._entries @ vector)

    def __add__(self, other: "SymMatrix") -> "SymMatrix":
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return SymMatrix(self._entries + other._entries)

    def __sub__(self, other: "SymMatrix") -> "SymMatrix":
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return SymMatrix(self._entries - other._entries)

    def __neg__(self) -> "SymMatrix":
        return SymMatrix(-self._entries)

    def __mul__(self, factor: float) -> "SymMatrix":
        return SymMatrix(self._entries * float(factor))

    __rmul__ = __mul__

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._entries
        return self._entries.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return bool(np.array_equal(self._entries, other._entries))

    __hash__ = None  # type: ignore

    def __repr__(self):
        return f"{self.__class__.__name__}(dim={self.dim})"


@dataclasses.dataclass(frozen=True)
class EigPair:
    """
    An eigenvalue and a unit-norm eigenvector. Solvers that iterate also report whether they
    converged, whether the matrix was identically zero (`degenerate`), and whether the largest
    magnitude was shared by a positive and a negative eigenvalue (`tie`).
    """

    value: float
    vector: Types.Array
    converged: bool = True
    degenerate: bool = False
    tie: bool = False
    iterations: int = 0

    @property
    def magnitude(self) -> float:
        return abs(self.value)


def canonical_sign(vector: Types.Array) -> Types.Array:
    """Flips `vector` so that its largest-magnitude component is positive."""
    pivot = int(np.argmax(np.abs(vector)))
    return -vector if vector[pivot] < 0 else vector


def uncentered_covariance(samples: SampleMatrix | Any) -> SymMatrix:
    """
    Returns the uncentered second-moment matrix (1/n) X^T X of an n-by-d sample matrix. No mean is
    subtracted. The reduction runs over rows in a fixed order, so the result is reproducible bit
    for bit.
    """

    if isinstance(samples, SampleMatrix):
        data = samples.data
    else:
        data = as_float_matrix(samples, name="sample matrix")
        if data.shape[0] == 0:
            raise Exceptions.EmptySample()
    n = data.shape[0]
    return SymMatrix(np.einsum("ni,nj->ij", data, data, optimize=False) / n)


def jacobi_eig(matrix: SymMatrix | Any, max_sweeps: int = 100) -> list[EigPair]:
    """
    Computes the full spectrum of a small symmetric matrix with cyclic Jacobi rotations. This is a
    slow reference solver meant for tests and cross-checks.

    Args:
        matrix:
            The matrix to diagonalize. Its dimension may not exceed 64.
        max_sweeps:
            Upper bound on full cyclic sweeps over the upper triangle. Well-conditioned inputs
            need fewer than ten.

    Returns:
        The eigenpairs sorted by descending eigenvalue.
    """

    matrix = SymMatrix.coerce(matrix)
    dim = matrix.dim
    if dim > ORACLE_MAX_DIM:
        raise Exceptions.OracleSizeLimit("oracle size limit")

    a = matrix.entries.copy()
    v = np.eye(dim)
    threshold = 1e-12 * max(1.0, matrix.norm())

    def off_norm():
        return float(np.linalg.norm(a - np.diag(np.diag(a))))

    sweeps = 0
    while off_norm() >= threshold and sweeps < max_sweeps:
        sweeps += 1
        for p in range(dim - 1):
            for q in range(p + 1, dim):
                if a[p, q] == 0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2 * a[p, q])
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1 + tau * tau))
                c = 1 / np.sqrt(1 + t * t)
                s = t * c
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = c * col_p - s * col_q, s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :], a[q, :] = c * row_p - s * row_q, s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vec_p, vec_q = v[:, p].copy(), v[:, q].copy()
                v[:, p], v[:, q] = c * vec_p - s * vec_q, s * vec_p + c * vec_q

    if off_norm() >= threshold:
        Log.warn(f"Jacobi rotations stopped after ${sweeps} sweep$ without full convergence.")
    else:
        Log.debug(f"Jacobi rotations converged in ${sweeps} sweep$.")

    values = np.diag(a)
    order = np.argsort(-values, kind="stable")
    return [
        EigPair(
            value=float(values[index]),
            vector=canonical_sign(v[:, index] / np.linalg.norm(v[:, index])),
            iterations=sweeps,
        )
        for index in order
    ]
