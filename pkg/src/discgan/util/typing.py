from numbers import Integral, Real
from typing import TYPE_CHECKING, Any, TypeAlias

import numpy as np

from ..base import Exceptions, Types

if TYPE_CHECKING:
    from ..datagen import RngStream

RngLike: TypeAlias = "int | RngStream | np.random.Generator | None"


def typestr(obj: Any) -> str:
    """
    Returns a short textual description of an object's type for error messages. Arrays include
    their shape and dtype, for example
    ```
    >>> typestr(np.zeros((3, 2)))
    'ndarray[float64, (3, 2)]'
    ```
    """

    if isinstance(obj, np.ndarray):
        return f"ndarray[{obj.dtype}, {obj.shape}]"
    if isinstance(obj, (list, tuple)):
        inner = sorted({typestr(item) for item in obj})
        return f"{type(obj).__name__}[{' | '.join(inner)}]"
    return type(obj).__name__


def as_generator(rng: Any) -> np.random.Generator:
    """
    Normalizes the accepted forms of randomness into a numpy `Generator`:
    - `None` or an integer seed create a fresh PCG64 generator (None means seed 0, so that library
      calls without explicit randomness are still reproducible),
    - an `RngStream` hands out its own generator,
    - a `Generator` is returned as is.
    """

    from ..datagen import RngStream

    if rng is None:
        return np.random.Generator(np.random.PCG64(0))
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, Integral) and not isinstance(rng, bool):
        return np.random.Generator(np.random.PCG64(int(rng)))
    raise Exceptions.ParameterError(f"cannot use '{typestr(rng)}' as a random source")


def as_float_matrix(data: Any, name: str = "matrix") -> Types.Array:
    """
    Converts array-like input into a 2-D float64 array. One-dimensional input is read as a single
    column.
    """

    try:
        array = np.asarray(data, dtype=np.float64)
    except (TypeError, ValueError) as error:
        raise Exceptions.ParameterError(f"{name} is not numeric ({typestr(data)})") from error
    if array.ndim == 1:
        array = array[:, None]
    if array.ndim != 2:
        raise Exceptions.DimensionMismatch(f"{name} must be two-dimensional, got {array.shape}")
    return array


def check_positive(value: Any, name: str, integer: bool = False, allow_zero: bool = False):
    """Raises `Exceptions.ParameterError` unless `value` is a (strictly) positive number."""

    kind = Integral if integer else Real
    if not isinstance(value, kind) or isinstance(value, bool):
        raise Exceptions.ParameterError(f"{name} must be {'an integer' if integer else 'a number'}")
    if not np.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        raise Exceptions.ParameterError(
            f"{name} must be {'non-negative' if allow_zero else 'positive'} (got {value})",
        )
    return value
