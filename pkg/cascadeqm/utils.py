import numpy as np


def sgn(n):
    """
    Sign of a resonator index, returned as +1 or -1 (indices are never 0).
    """
    return 1 if n > 0 else -1


def check_finite(name, value):
    """
    Raise a ValueError if any element of value is nan or inf.

    Parameters
    ----------
        name: string
            The parameter name used in the error message.
        value: float, complex or array of floats/complex
            The value(s) to check.

    Returns
    -------
        value: the unchanged input.
    """
    if not np.all(np.isfinite(value)):
        raise ValueError(f"{name} must be finite, got {value!r}")

    return value


def check_positive(name, value, strict=True):
    check_finite(name, value)
    if strict and not value > 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    if not strict and not value >= 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")

    return float(value)


def as_grid(omega):
    """
    Convert a scalar or list of frequencies into a float array, remembering
    whether the caller passed a scalar so results can be unwrapped again.
    """
    arr = np.asarray(omega, dtype=float)
    check_finite("omega", arr)

    return arr, arr.ndim == 0


def unwrap(values, scalar):
    if scalar:
        return np.asarray(values)[()]
    return values


def check_grid(grid):
    """
    Validate a frequency grid: non-empty, finite and strictly ascending.
    """
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise ValueError("frequency grid is empty")
    check_finite("grid", grid)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("frequency grid must be strictly ascending")

    return grid
