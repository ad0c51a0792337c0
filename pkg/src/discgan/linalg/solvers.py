import numpy as np

from ..base import Exceptions, Types
from ..util import Log
from ..util.typing import RngLike, as_generator, check_positive
from .symmetric import EigPair, SymMatrix, canonical_sign

DEFAULT_TOL = 1e-10

# Relative size below which a Krylov residual means the subspace is invariant.
_INVARIANT_EPS = 1e-14
# Period-two Rayleigh quotients whose swing shrinks slower than this per two steps count as an
# oscillation, which happens when the dominant magnitude is shared by eigenvalues of both signs.
_OSCILLATION_DECAY = 0.999


def default_max_iter(dim: int) -> int:
    return 10 * dim + 200


class SpectralSolverBase:
    """
    Base class for dominant-eigenpair solvers. Any solver implementation must provide
    `dominant()`, which returns the eigenpair of the eigenvalue of largest absolute value. For a
    symmetric matrix, its magnitude is the spectral norm.
    """

    def dominant(self, matrix: SymMatrix, /, rng: RngLike = None) -> EigPair:
        """
        Finds the dominant eigenpair of the given matrix. Eigenvector signs are canonical (the
        largest-magnitude component is positive). When a positive and a negative eigenvalue share
        the largest magnitude, the positive one is returned with the `tie` flag set. The zero matrix
        yields value 0, an arbitrary unit vector, and the `degenerate` flag.
        """
        raise NotImplementedError()

    def spectral_norm(self, matrix: SymMatrix, /, rng: RngLike = None) -> float:
        return self.dominant(matrix, rng=rng).magnitude

    def __repr__(self):
        return f"{self.__class__.__name__}()"


def _pick_dominant(values: Types.Array, tol: float) -> tuple[int, bool]:
    """
    Index of the largest-magnitude value, preferring positive values on a tie, and whether a
    tie between opposite signs occurred.
    """

    magnitudes = np.abs(values)
    top = float(np.max(magnitudes))
    close = np.flatnonzero(magnitudes >= top - tol * max(1.0, top))
    positive = [index for index in close if values[index] >= 0]
    negative = [index for index in close if values[index] < 0]
    tie = len(positive) > 0 and len(negative) > 0
    if positive:
        return int(max(positive, key=lambda index: values[index])), tie
    return int(min(negative, key=lambda index: values[index])), tie


def _degenerate(dim: int, generator: np.random.Generator) -> EigPair:
    vector = generator.standard_normal(dim)
    vector = canonical_sign(vector / np.linalg.norm(vector))
    Log.debug("Dominant eigenpair requested for the zero matrix.")
    return EigPair(value=0.0, vector=vector, converged=True, degenerate=True)


class PowerMethod(SpectralSolverBase):
    """
    Power iteration from a seeded random unit vector.

    By default (`krylov=True`), the iteration keeps all of its iterates: the power sequence
    v, Mv, M^2 v, ... spans a Krylov space, which is kept orthonormal, and the Rayleigh quotient is
    maximized in magnitude over that whole space rather than at the last iterate alone. This picks
    up eigenvalues of both signs at once and converges in at most `dim` steps. When the largest
    magnitude is shared by opposite signs (up to `tol`), the positive eigenvalue is returned with
    `tie` set and `converged` cleared, as the plain iteration would report it.

    With `krylov=False`, the textbook iteration v <- Mv / |Mv| is used. A Rayleigh quotient that
    oscillates between two values signals opposite-signed eigenvalues of (nearly) equal magnitude;
    the iteration then restarts once from a fresh random vector and finally returns its best
    iterate flagged as not converged.
    """

    tol: float
    max_iter: int | None
    krylov: bool

    def __init__(self, tol: float = DEFAULT_TOL, max_iter: int | None = None, krylov: bool = True):
        """
        Args:
            tol:
                Convergence threshold on successive Rayleigh quotients.
            max_iter:
                Maximum number of matrix-vector products per attempt. Defaults to 10 * dim + 200.
            krylov:
                Whether to use the Krylov-space Rayleigh quotient (see class docstring).
        """
        check_positive(tol, "tol")
        if max_iter is not None:
            check_positive(max_iter, "max_iter", integer=True)
        self.tol = float(tol)
        self.max_iter = max_iter
        self.krylov = krylov

    def __repr__(self):
        return (
            f"{self.__class__.__name__}(tol={self.tol}, max_iter={self.max_iter}, "
            f"krylov={self.krylov})"
        )

    def dominant(self, matrix: SymMatrix, /, rng: RngLike = None) -> EigPair:
        matrix = SymMatrix.coerce(matrix)
        generator = as_generator(rng)
        if matrix.is_zero():
            return _degenerate(matrix.dim, generator)
        max_iter = self.max_iter if self.max_iter is not None else default_max_iter(matrix.dim)
        if self.krylov:
            return self._krylov(matrix, generator, max_iter)
        return self._plain(matrix, generator, max_iter)

    @staticmethod
    def _start(dim: int, generator: np.random.Generator) -> Types.Array:
        vector = generator.standard_normal(dim)
        return vector / np.linalg.norm(vector)

    def _krylov(self, matrix: SymMatrix, generator: np.random.Generator, max_iter: int):
        m = matrix.entries
        dim = matrix.dim
        scale = float(np.max(np.abs(m)))
        steps = min(max_iter, dim)

        basis = np.zeros((dim, steps))
        projected = np.zeros((steps, steps))
        basis[:, 0] = self._start(dim, generator)

        previous = None
        converged = False
        for k in range(1, steps + 1):
            image = m @ basis[:, k - 1]
            column = basis[:, :k].T @ image
            projected[:k, k - 1] = column
            projected[k - 1, :k] = column

            ritz_values, ritz_vectors = np.linalg.eigh(projected[:k, :k])
            index, tie = _pick_dominant(ritz_values, self.tol)
            value = float(ritz_values[index])

            residual = image - basis[:, :k] @ column
            residual -= basis[:, :k] @ (basis[:, :k].T @ residual)
            beta = float(np.linalg.norm(residual))
            ritz_residual = beta * abs(float(ritz_vectors[k - 1, index]))

            invariant = beta <= _INVARIANT_EPS * scale * dim or k == dim
            settled = (
                previous is not None
                and abs(value - previous) < self.tol
                and ritz_residual < np.sqrt(self.tol) * max(1.0, abs(value))
            )
            if invariant or settled:
                converged = True
                break
            previous = value
            if k < steps:
                basis[:, k] = residual / beta

        vector = basis[:, :k] @ ritz_vectors[:, index]
        vector = canonical_sign(vector / np.linalg.norm(vector))
        if tie:
            Log.warn(
                lambda: f"Dominant magnitude |{abs(value):.6g}| is shared by both signs; "
                "using the positive eigenvalue and flagging it as not converged.",
            )
        elif not converged:
            Log.warn(f"Power method did not converge within ${k} iteration$.")
        return EigPair(
            value=matrix.quadratic_form(vector),
            vector=vector,
            converged=converged and not tie,
            tie=tie,
            iterations=k,
        )

    def _plain(self, matrix: SymMatrix, generator: np.random.Generator, max_iter: int):
        m = matrix.entries
        best_value, best_vector, total = 0.0, self._start(matrix.dim, generator), 0

        for attempt in range(2):
            vector = self._start(matrix.dim, generator) if attempt > 0 else best_vector
            history: list[float] = [float(vector @ m @ vector)]
            oscillating = False
            for _ in range(max_iter):
                total += 1
                image = m @ vector
                norm = float(np.linalg.norm(image))
                if norm == 0:
                    # Started in the null space; nothing to iterate on.
                    break
                vector = image / norm
                quotient = float(vector @ m @ vector)
                history.append(quotient)
                if abs(quotient) > abs(best_value):
                    best_value, best_vector = quotient, vector
                residual = float(np.linalg.norm(m @ vector - quotient * vector))
                if (
                    abs(history[-1] - history[-2]) < self.tol
                    and residual < np.sqrt(self.tol) * max(1.0, abs(quotient))
                ):
                    vector = canonical_sign(vector)
                    return EigPair(
                        value=matrix.quadratic_form(vector),
                        vector=vector,
                        iterations=total,
                    )
                if self._oscillates(history):
                    oscillating = True
                    break
            if oscillating and attempt == 0:
                Log.debug("Rayleigh quotient oscillates; restarting the power method once.")
                continue
            break

        Log.warn(
            f"Power method did not converge within ${total} iteration$; returning best iterate.",
        )
        best_vector = canonical_sign(best_vector)
        return EigPair(
            value=matrix.quadratic_form(best_vector),
            vector=best_vector,
            converged=False,
            iterations=total,
        )

    @staticmethod
    def _oscillates(history: list[float]) -> bool:
        if len(history) < 6:
            return False
        diffs = np.diff(history[-6:])
        alternating = bool(np.all(diffs[1:] * diffs[:-1] < 0))
        return alternating and abs(diffs[-1]) >= _OSCILLATION_DECAY * abs(diffs[-3])


class ExactSolver(SpectralSolverBase):
    """
    Dense symmetric eigendecomposition (LAPACK, through numpy). Deterministic and exact to machine
    precision; `rng` is only used for the vector returned for the zero matrix.
    """

    def dominant(self, matrix: SymMatrix, /, rng: RngLike = None) -> EigPair:
        matrix = SymMatrix.coerce(matrix)
        if matrix.is_zero():
            return _degenerate(matrix.dim, as_generator(rng))
        values, vectors = np.linalg.eigh(matrix.entries)
        index, tie = _pick_dominant(values, 1e-12)
        if tie:
            Log.warn("Dominant magnitude is shared by both signs; using the positive eigenvalue.")
        vector = canonical_sign(vectors[:, index])
        return EigPair(value=float(values[index]), vector=vector, tie=tie, iterations=1)


def dominant_eigpair(
    matrix: SymMatrix,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
    rng: RngLike = None,
    krylov: bool = True,
) -> EigPair:
    """
    Returns the eigenpair of the eigenvalue of largest absolute value, computed with the power
    method. Shorthand for `PowerMethod(tol, max_iter, krylov).dominant(matrix, rng=rng)`.
    """
    return PowerMethod(tol=tol, max_iter=max_iter, krylov=krylov).dominant(matrix, rng=rng)


def resolve_solver(solver: SpectralSolverBase | None) -> SpectralSolverBase:
    if solver is None:
        return PowerMethod()
    if not isinstance(solver, SpectralSolverBase):
        raise Exceptions.ParameterError(f"not a spectral solver: '{type(solver).__name__}'")
    return solver


def solver_by_name(name: str, tol: float = DEFAULT_TOL) -> SpectralSolverBase:
    """Maps the configuration names `"power"`, `"power-plain"` and `"exact"` to solvers."""
    if name == "power":
        return PowerMethod(tol=tol)
    if name == "power-plain":
        return PowerMethod(tol=tol, krylov=False)
    if name == "exact":
        return ExactSolver()
    raise Exceptions.ParameterError(f"unknown spectral solver '{name}'")
