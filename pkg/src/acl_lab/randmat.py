"""Seeded random Hermitian matrices for the environment and interaction terms.

Each matrix is drawn from a Philox counter-based generator keyed by
``(seed, label)``; the two labels give independent streams from one seed.
Independent entries are consumed in upper-triangle row-major order, real
part before imaginary part. The diagonal imaginary draw is consumed and
then discarded so that the stream layout does not depend on position.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class InvalidSpecError(ValueError):
    pass


class Label(enum.IntEnum):
    ENVIRONMENT = 0
    INTERACTION = 1


@dataclass(frozen=True)
class RandomMatrixSpec:
    dimension: int
    seed: int
    label: Label = Label.ENVIRONMENT

    def __post_init__(self):
        if int(self.dimension) < 1:
            raise InvalidSpecError(f"dimension must be >= 1, got {self.dimension}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidSpecError(f"seed must fit in 64 unsigned bits, got {self.seed}")


def stream(seed: int, label: Label | int) -> np.random.Generator:
    """Return the generator for one ``(seed, label)`` pair.

    The split is ``SeedSequence([seed, label])`` feeding a Philox4x64 bit
    generator, so the result does not depend on platform or thread count.
    """
    ss = np.random.SeedSequence([int(seed), int(label)])
    return np.random.Generator(np.random.Philox(ss))


def sample_hermitian(spec: RandomMatrixSpec) -> np.ndarray:
    """Draw an N x N Hermitian matrix with entries uniform on [-0.5, 0.5]."""
    n = int(spec.dimension)
    rng = stream(spec.seed, spec.label)
    n_upper = n * (n + 1) // 2
    draws = rng.random(2 * n_upper) - 0.5
    iu, ju = np.triu_indices(n)  # row-major over the upper triangle
    upper = draws[0::2] + 1j * draws[1::2]

    m = np.zeros((n, n), dtype=np.complex128)
    m[iu, ju] = upper
    m[ju, iu] = np.conj(upper)
    m[np.diag_indices(n)] = m.diagonal().real
    return m
