"""Input validation helpers shared by the library and the estimators."""

import numbers

import numpy as np


def check_point(system, x):
    """Return ``x`` as a float vector of the system's dimension."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.shape[0] != system.d:
        raise ValueError(
            f"point has shape {x.shape}, expected ({system.d},) for system {system.id!r}"
        )
    if not np.all(np.isfinite(x)):
        raise ValueError("point has non-finite coordinates")
    return x


def check_points(system, X):
    """Return ``X`` as a float array of shape ``(B, d)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and system.d == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] != system.d:
        raise ValueError(
            f"points have shape {X.shape}, expected (n, {system.d}) for system {system.id!r}"
        )
    if not np.all(np.isfinite(X)):
        raise ValueError("points have non-finite coordinates")
    return X


def check_k(k, d):
    if not isinstance(k, numbers.Integral) or not 1 <= k <= d:
        raise ValueError(f"k must be an integer in [1, {d}], got {k!r}")
    return int(k)


def check_schedule(values, name, minimum=0):
    """Nonempty, strictly increasing integer schedule."""
    values = [int(v) for v in values]
    if not values:
        raise ValueError(f"{name} must be nonempty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{name} must be strictly increasing, got {values}")
    if values[0] < minimum:
        raise ValueError(f"{name} entries must be >= {minimum}, got {values}")
    return values
