"""Reduced density matrices, entanglement entropy and energy distributions."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

TRACE_TOL = 1e-10
NEG_CLAMP = 1e-12
NEG_FAIL = 1e-10


class Space(enum.Enum):
    SYSTEM = "system"
    ENVIRONMENT = "environment"


class InvalidDensityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray
    space: Space

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def _coefficients(state, dims):
    n_s, n_e = dims
    state = np.asarray(state)
    if state.shape != (n_s * n_e,):
        raise ValueError(f"state of shape {state.shape} does not match dims {dims}")
    return state.reshape(n_s, n_e)


def partial_trace(state, keep: Space, dims: tuple[int, int]) -> DensityMatrix:
    """Reduce a system-major world vector to rho_s or rho_e."""
    m = _coefficients(state, dims)
    keep = Space(keep)
    if keep is Space.SYSTEM:
        rho = m @ m.conj().T
    else:
        rho = m.T @ m.conj()
    return DensityMatrix(rho, keep)


def _spectrum(rho) -> np.ndarray:
    lam = np.linalg.eigvalsh(np.asarray(rho))
    if lam.min() < -NEG_FAIL:
        raise InvalidDensityError(f"density matrix has eigenvalue {lam.min():.3g}")
    if abs(lam.sum() - 1.0) > TRACE_TOL:
        raise InvalidDensityError(f"density matrix has trace {lam.sum():.15g}")
    return np.where(lam < NEG_CLAMP, 0.0, lam)


def entropy_of_spectrum(lam: np.ndarray, base: float = math.e) -> float:
    lam = lam[lam > 0]
    return float(-(lam * np.log(lam)).sum() / math.log(base))


def entanglement_entropy(rho, base: float = math.e) -> float:
    """von Neumann entropy, natural log by default, 0 ln 0 = 0."""
    return entropy_of_spectrum(_spectrum(rho), base)


def schmidt_entropy(state, dims, base: float = math.e) -> float:
    """Entanglement entropy from the singular values of the coefficient matrix."""
    sv = np.linalg.svd(_coefficients(state, dims), compute_uv=False)
    return entropy_of_spectrum(sv**2, base)


@dataclass(frozen=True, eq=False)
class EnergyDistribution:
    energies: np.ndarray
    probabilities: np.ndarray
    bin_edges: np.ndarray | None = None

    def __post_init__(self):
        if self.energies.shape != self.probabilities.shape:
            raise ValueError("energies and probabilities differ in length")

    @property
    def binned(self) -> bool:
        return self.bin_edges is not None

    @property
    def total(self) -> float:
        return math.fsum(self.probabilities)

    def mean(self) -> float:
        return float(self.energies @ self.probabilities)


def energy_distribution(rho, subsystem_decomp) -> EnergyDistribution:
    """Diagonal of rho in the eigenbasis of the subsystem self-Hamiltonian."""
    rho = np.asarray(rho)
    v = subsystem_decomp.eigenvectors
    if rho.shape != (v.shape[0], v.shape[0]):
        raise ValueError(f"rho of shape {rho.shape} does not match basis of size {v.shape[0]}")
    p = np.einsum("ik,ij,jk->k", v.conj(), rho, v).real
    return EnergyDistribution(subsystem_decomp.eigenvalues.copy(), np.clip(p, 0.0, None))


def bin_distribution(dist: EnergyDistribution, n_bins: int, edges=None) -> EnergyDistribution:
    """Sum probabilities into uniform bins over [min E, max E].

    The last bin is closed on the right. ``edges`` overrides the uniform grid
    so several distributions can share bins.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    e = dist.energies
    if edges is None:
        lo, hi = float(e.min()), float(e.max())
        edges = np.linspace(lo, hi, n_bins + 1)
    edges = np.asarray(edges, dtype=float)
    n_bins = len(edges) - 1
    idx = np.clip(np.searchsorted(edges, e, side="right") - 1, 0, n_bins - 1)
    probs = np.bincount(idx, weights=dist.probabilities, minlength=n_bins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return EnergyDistribution(centers, probs, edges)


def world_energy_distribution(state, eigenvalues=None) -> EnergyDistribution:
    """P_w(E_i) = |alpha_i|^2 on the world eigenvalue grid."""
    amps = getattr(state, "amplitudes", state)
    p = np.abs(np.asarray(amps)) ** 2
    grid = np.arange(p.size, dtype=float) if eigenvalues is None else np.asarray(eigenvalues, dtype=float)
    return EnergyDistribution(grid, p)


def effective_dimension(dist) -> float:
    """1 / sum_i p_i^2 on the unbinned distribution."""
    if isinstance(dist, EnergyDistribution):
        if dist.binned:
            raise ValueError("effective dimension is defined on unbinned distributions")
        p = dist.probabilities
    else:
        p = np.asarray(dist, dtype=float)
    s = float(np.dot(p, p))
    if s <= 0.0:
        raise ValueError("effective dimension of a zero distribution")
    return 1.0 / s


def total_variation(p, q) -> float:
    p = getattr(p, "probabilities", p)
    q = getattr(q, "probabilities", q)
    p, q = np.asarray(p), np.asarray(q)
    if p.shape != q.shape:
        raise ValueError("distributions live on different grids")
    return 0.5 * float(np.abs(p - q).sum())
