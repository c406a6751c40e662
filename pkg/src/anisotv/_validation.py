"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

import numbers

import numpy as np

from .exceptions import InvalidInputError


def check_finite_array(a, name="array", dtype=float):
    """Return ``a`` as a float array, raising if any entry is NaN or inf."""
    arr = np.asarray(a, dtype=dtype)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def check_vectors(v, dim, name="vector"):
    """Validate an array of ``dim``-vectors stored along the last axis."""
    arr = check_finite_array(v, name)
    if arr.ndim == 0 or arr.shape[-1] != dim:
        raise InvalidInputError(
            f"{name} must have trailing dimension {dim}, got shape {arr.shape}"
        )
    return arr


def check_point(x, dim, name="point"):
    arr = check_vectors(x, dim, name)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be a single {dim}-vector")
    return arr


def check_positive(value, name, allow_zero=False):
    """Check a real scalar is (strictly) positive and return it as float."""
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise InvalidInputError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        raise InvalidInputError(f"{name} must be positive, got {value}")
    return value


def check_radii(radii, min_radius=0.0, name="radii"):
    """Radii must be a non-empty, strictly decreasing list above ``min_radius``."""
    r = check_finite_array(radii, name)
    if r.ndim != 1 or r.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty 1-d sequence")
    if np.any(np.diff(r) >= 0):
        raise InvalidInputError(f"{name} must be strictly decreasing")
    # small slack so that e.g. radius 2h passes when h is inexact in binary
    if r[-1] < min_radius * (1 - 1e-12):
        raise InvalidInputError(f"{name} must all be >= {min_radius}")
    return r
