"""World Hamiltonian H_w = H_s (x) 1 + q_s (x) H_e^I + 1 (x) H_e.

World-space vectors are flattened system-major: ``k = i_s * N_e + i_e``, so
``psi.reshape(N_s, N_e)`` is the coefficient matrix with system rows.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from .oscillator import OscillatorSpace, position_operator, sho_hamiltonian
from .randmat import Label, RandomMatrixSpec, sample_hermitian

log = logging.getLogger(__name__)

COMPLEX_BYTES = 16


class ResourceError(MemoryError):
    pass


@dataclass(frozen=True)
class ModelParams:
    N_s: int = 30
    N_e: int = 600
    E_e: float = 1.0
    E_I: float = 0.02
    E0_e: float = 0.0
    E0_I: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.N_s < 2 or self.N_e < 1:
            raise ValueError(f"need N_s >= 2 and N_e >= 1, got ({self.N_s}, {self.N_e})")

    @property
    def N_w(self) -> int:
        return self.N_s * self.N_e

    def to_dict(self) -> dict:
        return asdict(self)

    def fingerprint(self) -> bytes:
        """SHA-256 over the canonical JSON of the parameters (32 bytes)."""
        payload = json.dumps(
            {k: (float(v) if isinstance(v, float) else v) for k, v in self.to_dict().items()},
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode()).digest()


def physical_memory() -> int:
    try:
        return os.sysconf("SC_PAGE_SIZE") * os.sysconf("SC_PHYS_PAGES")
    except (ValueError, OSError, AttributeError):  # pragma: no cover
        return 2**40


def dense_bytes(n: int, copies: int = 1) -> int:
    return copies * n * n * COMPLEX_BYTES


def check_memory(n: int, copies: int, cap: int | None = None) -> int:
    """Log the dense-storage estimate and raise ResourceError above ``cap``."""
    need = dense_bytes(n, copies)
    cap = physical_memory() if cap is None else cap
    log.info("dense storage for %d x %d complex (x%d): %.3g GB", n, n, copies, need / 1e9)
    if need > cap:
        raise ResourceError(
            f"requested {need} bytes ({need / 1e9:.2f} GB) for {copies} dense "
            f"{n}x{n} complex matrices; cap is {cap} bytes"
        )
    return need


def build_environment(params: ModelParams) -> np.ndarray:
    r = sample_hermitian(RandomMatrixSpec(params.N_e, params.seed, Label.ENVIRONMENT))
    return params.E_e * r + params.E0_e * np.eye(params.N_e)


def build_interaction_env(params: ModelParams) -> np.ndarray:
    r = sample_hermitian(RandomMatrixSpec(params.N_e, params.seed, Label.INTERACTION))
    return params.E_I * r + params.E0_I * np.eye(params.N_e)


@dataclass(frozen=True, eq=False)
class WorldOperators:
    """Factors of H_w plus lazily materialized dense lifts.

    ``apply_*`` and ``expect_*`` work on the factors and never build an
    N_w x N_w matrix; the ``*_lift`` attributes do.
    """

    params: ModelParams
    H_s: np.ndarray
    q_s: np.ndarray
    H_e: np.ndarray
    H_eI: np.ndarray
    basis: str = field(default="system-major", init=False)

    @property
    def dims(self) -> tuple[int, int]:
        return self.params.N_s, self.params.N_e

    @cached_property
    def H_s_lift(self) -> np.ndarray:
        return np.kron(self.H_s, np.eye(self.params.N_e))

    @cached_property
    def H_e_lift(self) -> np.ndarray:
        return np.kron(np.eye(self.params.N_s), self.H_e)

    @cached_property
    def H_I_lift(self) -> np.ndarray:
        return np.kron(self.q_s, self.H_eI)

    @cached_property
    def H_w(self) -> np.ndarray:
        # filled block by block so no lifted temporaries are allocated
        n_s, n_e = self.dims
        h = np.zeros((n_s * n_e, n_s * n_e), dtype=np.complex128)
        eye = np.eye(n_e)
        for a in range(n_s):
            for b in range(n_s):
                # same summation order as H_s_lift + H_I_lift + H_e_lift
                blk = self.H_s[a, b] * eye + self.q_s[a, b] * self.H_eI
                if a == b:
                    blk = blk + self.H_e
                h[a * n_e:(a + 1) * n_e, b * n_e:(b + 1) * n_e] = blk
        return h

    # Factored actions on (..., N_w) vectors; columns of a matrix are also accepted.
    def _mat(self, psi):
        n_s, n_e = self.dims
        return psi.reshape(n_s, n_e, *psi.shape[1:])

    def apply_parts(self, psi: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        m = self._mat(psi)
        hs = np.tensordot(self.H_s, m, axes=(1, 0))
        he = np.einsum("jk,ik...->ij...", self.H_e, m)
        hi = np.einsum("ab,jk,bk...->aj...", self.q_s, self.H_eI, m, optimize=True)
        return tuple(x.reshape(psi.shape) for x in (hs, he, hi))

    def energies(self, psi: np.ndarray) -> tuple[float, float, float]:
        """Return (<H_s>, <H_e>, <H_I>) for a world vector."""
        m = self._mat(psi)
        e_s = np.vdot(m, self.H_s @ m)
        e_e = np.vdot(m, m @ self.H_e.T)
        e_i = np.vdot(m, self.q_s @ m @ self.H_eI.T)
        return tuple(_real(x) for x in (e_s, e_e, e_i))


def _real(z, tol: float = 1e-10) -> float:
    if abs(np.imag(z)) > tol * max(1.0, abs(z)):
        raise ValueError(f"expectation value has imaginary part {np.imag(z):.3g}")
    return float(np.real(z))


def assemble_world(params: ModelParams, memory_cap: int | None = None, dense: bool = True) -> WorldOperators:
    """Build H_w for ``params``.

    With ``dense=True`` (default) the memory estimate for H_w is checked and
    the dense matrix is materialized immediately.
    """
    osc = OscillatorSpace(params.N_s)
    ops = WorldOperators(
        params,
        sho_hamiltonian(osc),
        position_operator(osc),
        build_environment(params),
        build_interaction_env(params),
    )
    if dense:
        check_memory(params.N_w, 1, memory_cap)
        ops.H_w
    return ops


def expectation(op: np.ndarray, state: np.ndarray) -> float:
    """<psi|op|psi>, asserting the imaginary part is negligible."""
    op = np.asarray(op)
    state = np.asarray(state)
    if op.shape != (state.shape[0], state.shape[0]):
        raise ValueError(f"operator shape {op.shape} does not match state length {state.shape[0]}")
    return _real(np.vdot(state, op @ state))


def product_state(sys_vec: np.ndarray, env_vec: np.ndarray) -> np.ndarray:
    return np.kron(sys_vec, env_vec)
