"""Estimator front end for the ACL model.

``ACLModel().fit()`` assembles H_w and diagonalizes it (optionally through
the on-disk cache). After fitting, ``transform`` maps world vectors to
eigenbasis amplitudes and ``predict`` returns the dephased (diagonal
ensemble) subsystem energies of each input state.
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import spectral
from .hamiltonian import ModelParams, assemble_world, check_memory
from .validation import check_positive_int, check_real, check_states, check_times

log = logging.getLogger(__name__)


def cache_path(cache_dir, params: ModelParams) -> Path:
    return Path(cache_dir) / f"aclw-{params.fingerprint().hex()[:20]}.bin"


class ACLModel(TransformerMixin, BaseEstimator):
    """Truncated oscillator coupled to a random-matrix environment.

    Parameters
    ----------
    n_sys, n_env : int
        Oscillator levels N_s and environment dimension N_e.
    env_scale, coupling : float
        E_e and E_I, the scales of the environment and interaction matrices.
    env_offset, coupling_offset : float
        Identity offsets E0_e and E0_I.
    seed : int
        Seed for both random matrices (split into two streams internally).
    cache_dir : path or None
        Where eigendecompositions are stored and looked up.
    memory_cap : int or None
        Byte limit for dense allocations; defaults to physical memory.
    """

    def __init__(self, n_sys=30, n_env=600, env_scale=1.0, coupling=0.02, env_offset=0.0,
                 coupling_offset=0.0, seed=0, cache_dir=None, memory_cap=None):
        self.n_sys = n_sys
        self.n_env = n_env
        self.env_scale = env_scale
        self.coupling = coupling
        self.env_offset = env_offset
        self.coupling_offset = coupling_offset
        self.seed = seed
        self.cache_dir = cache_dir
        self.memory_cap = memory_cap

    def model_params(self) -> ModelParams:
        return ModelParams(
            N_s=check_positive_int(self.n_sys, "n_sys", 2),
            N_e=check_positive_int(self.n_env, "n_env", 1),
            E_e=check_real(self.env_scale, "env_scale"),
            E_I=check_real(self.coupling, "coupling"),
            E0_e=check_real(self.env_offset, "env_offset"),
            E0_I=check_real(self.coupling_offset, "coupling_offset"),
            seed=check_positive_int(self.seed, "seed", 0),
        )

    @classmethod
    def from_params(cls, params: ModelParams, **kwargs) -> "ACLModel":
        return cls(params.N_s, params.N_e, params.E_e, params.E_I, params.E0_e, params.E0_I,
                   params.seed, **kwargs)

    def fit(self, X=None, y=None):
        params = self.model_params()
        fp = params.fingerprint()
        path = cache_path(self.cache_dir, params) if self.cache_dir is not None else None
        ops = assemble_world(params, self.memory_cap, dense=False)
        decomp = None
        self.decomposition_report_ = None
        if path is not None and path.exists():
            check_memory(params.N_w, 1, self.memory_cap)
            try:
                decomp = spectral.read_cache(path, fp)
                log.info("loaded decomposition from %s", path)
            except spectral.CacheError as exc:
                log.warning("ignoring unusable cache: %s", exc)
        if decomp is None:
            # H_w, eigenvectors and the residual check each hold one dense matrix
            check_memory(params.N_w, 3, self.memory_cap)
            decomp = spectral.decompose(ops.H_w, fp, check=False)
            self.decomposition_report_ = spectral.verify(decomp, ops.H_w)
            ops.__dict__.pop("H_w", None)
            if path is not None:
                path.parent.mkdir(parents=True, exist_ok=True)
                spectral.write_cache(path, decomp)
                log.info("wrote decomposition to %s", path)

        self.params_ = params
        self.operators_ = ops
        self.decomposition_ = decomp
        self.env_decomposition_ = spectral.decompose(ops.H_e)
        self.sys_decomposition_ = spectral.decompose(ops.H_s)
        self.n_features_in_ = params.N_w
        self._part_diag = None
        return self

    @property
    def dims(self) -> tuple[int, int]:
        check_is_fitted(self, "params_")
        return self.params_.N_s, self.params_.N_e

    def transform(self, X):
        """World vectors (rows) -> eigenbasis amplitudes (rows)."""
        check_is_fitted(self, "decomposition_")
        X = check_states(X, self.params_.N_w, normalized=False)
        return X @ self.decomposition_.eigenvectors.conj()

    def inverse_transform(self, A):
        check_is_fitted(self, "decomposition_")
        A = check_states(A, self.params_.N_w, normalized=False)
        return A @ self.decomposition_.eigenvectors.T

    def part_diagonals(self) -> np.ndarray:
        """<E_i|H_s|E_i>, <E_i|H_e|E_i>, <E_i|H_I|E_i> as a (3, N_w) array."""
        check_is_fitted(self, "decomposition_")
        if self._part_diag is None:
            v = self.decomposition_.eigenvectors
            out = np.empty((3, v.shape[1]))
            for start in range(0, v.shape[1], 256):
                cols = v[:, start:start + 256]
                for k, part in enumerate(self.operators_.apply_parts(cols)):
                    out[k, start:start + 256] = np.einsum("ij,ij->j", cols.conj(), part).real
            self._part_diag = out
        return self._part_diag

    def predict(self, X):
        """Diagonal-ensemble [E_s, E_e, E_int] for each initial world vector."""
        A = self.transform(check_states(X, self.n_features_in_))
        return (np.abs(A) ** 2) @ self.part_diagonals().T

    def evolve(self, x, times) -> np.ndarray:
        """World vectors at each time, one row per time."""
        check_is_fitted(self, "decomposition_")
        x = check_states(x, self.params_.N_w)[0]
        st = spectral.to_eigenbasis(self.decomposition_, x)
        return np.array([psi for _, psi in spectral.trajectory(st, self.decomposition_, check_times(times))])

    def energies(self, psi) -> tuple[float, float, float]:
        check_is_fitted(self, "operators_")
        return self.operators_.energies(np.asarray(psi))
