"""Truncated harmonic oscillator: ladder operators, H_s, q_s and coherent states.

Units are hbar = omega = 1 throughout.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

LEAKAGE_WARN = 1e-6


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class OscillatorSpace:
    dimension: int
    frequency: float = 1.0

    def __post_init__(self):
        if int(self.dimension) < 2:
            raise ValueError(f"oscillator dimension must be >= 2, got {self.dimension}")


def _space(space) -> OscillatorSpace:
    return space if isinstance(space, OscillatorSpace) else OscillatorSpace(int(space))


def lowering_operator(space) -> np.ndarray:
    n = _space(space).dimension
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1).astype(np.complex128)


def raising_operator(space) -> np.ndarray:
    return lowering_operator(space).conj().T


def sho_hamiltonian(space) -> np.ndarray:
    """diag(n + 1/2) scaled by the oscillator frequency."""
    sp = _space(space)
    return np.diag(sp.frequency * (np.arange(sp.dimension) + 0.5)).astype(np.complex128)


def position_operator(space) -> np.ndarray:
    a = lowering_operator(space)
    return (a + a.conj().T) / np.sqrt(2.0)


@dataclass(frozen=True)
class CoherentState:
    vector: np.ndarray
    alpha: complex
    leakage: float  # probability on the top level

    @property
    def degraded(self) -> bool:
        return self.leakage > LEAKAGE_WARN


def coherent_state(space, alpha: complex, warn: bool = True) -> CoherentState:
    """exp(alpha a^dag - alpha^* a)|0>, computed on the truncated space and renormalized."""
    sp = _space(space)
    a = lowering_operator(sp)
    gen = alpha * a.conj().T - np.conj(alpha) * a
    vec = scipy.linalg.expm(gen)[:, 0]
    vec = vec / np.linalg.norm(vec)
    leak = float(abs(vec[-1]) ** 2)
    if warn and leak > LEAKAGE_WARN:
        warnings.warn(
            f"coherent state alpha={alpha:.4g} puts weight {leak:.3g} on the top level "
            f"of a {sp.dimension}-level oscillator",
            TruncationWarning,
            stacklevel=2,
        )
    return CoherentState(vec, complex(alpha), leak)
