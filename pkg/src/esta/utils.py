"""Input validation helpers used across the package."""

import numbers

import numpy as np

from .exceptions import DomainError


def check_positive(value, name):
    """Return ``value`` as float, raising DomainError unless it is finite and > 0."""
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_nonnegative(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value < 0:
        raise DomainError(f"{name} must be a non-negative finite number, got {value!r}")
    return float(value)


def check_times(t, t_f, name="t"):
    """Validate that all entries of ``t`` lie in ``[0, t_f]``.

    A relative slack of 1e-12 is allowed at both ends so that grids built as
    ``linspace(0, t_f)`` pass without clipping.
    """
    t = np.asarray(t, dtype=float)
    slack = 1e-12 * max(1.0, t_f)
    if np.any(~np.isfinite(t)) or np.any(t < -slack) or np.any(t > t_f + slack):
        raise DomainError(f"{name} must lie in [0, t_f={t_f}]")
    return t


def check_control_vector(values, dimension, name="control vector"):
    """Return ``values`` as a 1-D float array of the expected length."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != dimension:
        raise DomainError(
            f"{name} must have dimension {dimension}, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def is_power_of_two(n):
    return isinstance(n, numbers.Integral) and n > 0 and (n & (n - 1)) == 0
