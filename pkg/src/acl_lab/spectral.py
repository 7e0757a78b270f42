"""Dense eigendecomposition, spectral propagation and the on-disk cache."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

CACHE_MAGIC = b"ACLW"
CACHE_VERSION = 1
_HEADER = struct.Struct("<4sIQ32s")

RESIDUAL_TOL = 1e-8
ORTHO_TOL = 1e-10
NORM_TOL = 1e-10


class NumericalError(RuntimeError):
    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


class CacheError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source_fingerprint: bytes = b"\0" * 32

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True, eq=False)
class EigenbasisState:
    amplitudes: np.ndarray
    reference: bytes = b"\0" * 32

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def decompose(H: np.ndarray, fingerprint: bytes = b"\0" * 32, check: bool = True) -> SpectralDecomposition:
    """Full Hermitian eigendecomposition with ascending eigenvalues.

    With ``check`` the residual and orthonormality bounds are verified; a
    violation raises NumericalError carrying the worst column index.
    """
    H = np.asarray(H)
    try:
        w, v = scipy.linalg.eigh(H, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        idx = None
        msg = str(exc)
        # LAPACK reports the failing eigenvalue index in the message
        digits = [int(t) for t in msg.replace(".", " ").split() if t.isdigit()]
        if digits:
            idx = digits[0]
        raise NumericalError(f"eigensolver failed: {msg}", index=idx) from exc
    decomp = SpectralDecomposition(w, v, fingerprint)
    if check:
        verify(decomp, H)
    return decomp


def verify(decomp: SpectralDecomposition, H: np.ndarray) -> dict:
    w, v = decomp.eigenvalues, decomp.eigenvectors
    hnorm = float(np.max(np.abs(w)))  # spectral norm of a Hermitian matrix
    res = np.linalg.norm(H @ v - v * w, axis=0)
    worst = int(np.argmax(res))
    if res[worst] > RESIDUAL_TOL * max(hnorm, 1e-300):
        raise NumericalError(f"eigenpair {worst} residual {res[worst]:.3g} exceeds tolerance", index=worst)
    ortho = np.abs(v.conj().T @ v - np.eye(v.shape[1])).max()
    if ortho > ORTHO_TOL:
        raise NumericalError(f"eigenvectors not orthonormal: max deviation {ortho:.3g}")
    return {"max_residual": float(res[worst]), "norm": float(hnorm), "orthonormality": float(ortho)}


def _check_dim(decomp, n):
    if n != decomp.dim:
        raise ValueError(f"state length {n} does not match decomposition dimension {decomp.dim}")


def to_eigenbasis(decomp: SpectralDecomposition, state: np.ndarray) -> EigenbasisState:
    state = np.asarray(state, dtype=np.complex128)
    _check_dim(decomp, state.shape[0])
    return EigenbasisState(decomp.eigenvectors.conj().T @ state, decomp.source_fingerprint)


def from_eigenbasis(decomp: SpectralDecomposition, state: EigenbasisState) -> np.ndarray:
    _check_dim(decomp, state.amplitudes.shape[0])
    return decomp.eigenvectors @ state.amplitudes


def evolve(state0: EigenbasisState, decomp: SpectralDecomposition, t: float) -> EigenbasisState:
    """alpha_i(t) = exp(-i E_i t) alpha_i(0)."""
    if not np.isfinite(t):
        raise ValueError("time must be finite")
    _check_dim(decomp, state0.amplitudes.shape[0])
    phase = np.exp(-1j * decomp.eigenvalues * t)
    return EigenbasisState(phase * state0.amplitudes, state0.reference)


def trajectory(state0: EigenbasisState, decomp: SpectralDecomposition, times, chunk: int = 64):
    """Yield (t, world vector) for each time, batching the back-transform."""
    times = np.asarray(times, dtype=float)
    v = decomp.eigenvectors
    for start in range(0, len(times), chunk):
        ts = times[start:start + chunk]
        amps = np.exp(-1j * np.outer(decomp.eigenvalues, ts)) * state0.amplitudes[:, None]
        psis = v @ amps
        for k, t in enumerate(ts):
            yield float(t), psis[:, k]


def randomize_phases(state: EigenbasisState, seed: int) -> EigenbasisState:
    """Multiply each amplitude by exp(i theta) with theta uniform on [0, 2 pi)."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 2])))
    theta = 2 * np.pi * rng.random(state.amplitudes.shape[0])
    return EigenbasisState(state.amplitudes * np.exp(1j * theta), state.reference)


def eigen_diagonal(decomp: SpectralDecomposition, op) -> np.ndarray:
    """<E_i|op|E_i> for every eigenvector.

    ``op`` is a dense matrix or a callable applying the operator to the
    columns of a matrix.
    """
    v = decomp.eigenvectors
    opv = op(v) if callable(op) else np.asarray(op) @ v
    if opv.shape != v.shape:
        raise ValueError(f"operator maps to shape {opv.shape}, expected {v.shape}")
    return np.einsum("ij,ij->j", v.conj(), opv).real


def diagonal_ensemble_expectation(state: EigenbasisState, decomp: SpectralDecomposition, op) -> float:
    """Phase-averaged <op>: sum_i |alpha_i|^2 <E_i|op|E_i>."""
    _check_dim(decomp, state.amplitudes.shape[0])
    return float(state.probabilities @ eigen_diagonal(decomp, op))


def write_cache(path, decomp: SpectralDecomposition) -> Path:
    """Write the binary cache: header, eigenvalues, column-major eigenvectors."""
    path = Path(path)
    n = decomp.dim
    fp = bytes(decomp.source_fingerprint)
    if len(fp) != 32:
        raise CacheError("fingerprint must be 32 bytes")
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, n, fp))
        f.write(np.ascontiguousarray(decomp.eigenvalues, dtype="<f8").tobytes())
        # column-major bytes of V are the row-major bytes of V^T
        vt = np.ascontiguousarray(np.asarray(decomp.eigenvectors, dtype="<c16").T)
        f.write(memoryview(vt).cast("B"))
    tmp.replace(path)
    return path


def read_cache(path, fingerprint: bytes | None = None) -> SpectralDecomposition:
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise CacheError(f"{path}: truncated header")
        magic, version, n, fp = _HEADER.unpack(head)
        if magic != CACHE_MAGIC:
            raise CacheError(f"{path}: bad magic {magic!r}")
        if version != CACHE_VERSION:
            raise CacheError(f"{path}: unsupported version {version}")
        if fingerprint is not None and fp != bytes(fingerprint):
            raise CacheError(f"{path}: fingerprint mismatch")
        w = np.fromfile(f, dtype="<f8", count=n)
        v = np.fromfile(f, dtype="<c16", count=n * n)
    if w.size != n or v.size != n * n:
        raise CacheError(f"{path}: truncated payload")
    return SpectralDecomposition(w.astype(np.float64), v.reshape(n, n).T.astype(np.complex128), fp)
