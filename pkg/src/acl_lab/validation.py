"""Input checks shared by the estimator and the experiment drivers."""
from __future__ import annotations

import numbers

import numpy as np

NORM_TOL = 1e-10


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_real(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    return float(value)


def check_state(state, dim: int, normalized: bool = True, name: str = "state") -> np.ndarray:
    """Return ``state`` as a complex 1-d array of length ``dim``."""
    x = np.asarray(state, dtype=np.complex128)
    if x.ndim != 1 or x.shape[0] != dim:
        raise ValueError(f"{name} must have shape ({dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    if normalized:
        nrm = np.linalg.norm(x)
        if abs(nrm - 1.0) > NORM_TOL:
            raise ValueError(f"{name} is not normalized (norm {nrm:.15g})")
    return x


def check_states(X, dim: int, normalized: bool = True) -> np.ndarray:
    """Stack of world vectors, one per row; a single vector is promoted."""
    X = np.asarray(X, dtype=np.complex128)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != dim:
        raise ValueError(f"expected states of shape (n, {dim}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("states contain non-finite entries")
    if normalized:
        norms = np.linalg.norm(X, axis=1)
        bad = np.abs(norms - 1.0) > NORM_TOL
        if bad.any():
            raise ValueError(f"state {int(np.argmax(bad))} is not normalized (norm {norms[bad][0]:.15g})")
    return X


def check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim == 0:
        t = t[None]
    if t.ndim != 1 or not np.all(np.isfinite(t)):
        raise ValueError("times must be a finite 1-d sequence")
    return t
