import numpy as np
import pytest

from acl_lab.hamiltonian import (ModelParams, ResourceError, assemble_world, build_environment,
                                 build_interaction_env, check_memory, expectation)
from acl_lab.oscillator import position_operator, sho_hamiltonian
from acl_lab.randmat import Label, RandomMatrixSpec, sample_hermitian

from .conftest import random_state


def kron_oracle(h_s, q_s, h_e, h_ei):
    """Index-by-index assembly of H_s x 1 + q_s x H_eI + 1 x H_e, system-major."""
    n_s, n_e = h_s.shape[0], h_e.shape[0]
    out = np.zeros((n_s * n_e, n_s * n_e), dtype=complex)
    for a in range(n_s):
        for i in range(n_e):
            for b in range(n_s):
                for j in range(n_e):
                    v = q_s[a, b] * h_ei[i, j]
                    if i == j:
                        v += h_s[a, b]
                    if a == b:
                        v += h_e[i, j]
                    out[a * n_e + i, b * n_e + j] = v
    return out


def test_environment_scaling_and_offset():
    p = ModelParams(2, 50, E_e=0.0, E_I=0.0)
    assert not build_environment(p).any()
    assert not build_interaction_env(p).any()
    base = np.linalg.eigvalsh(build_environment(ModelParams(2, 50, E_e=1.0)))
    shifted = np.linalg.eigvalsh(build_environment(ModelParams(2, 50, E_e=1.0, E0_e=3.25)))
    assert np.allclose(shifted - base, 3.25, atol=1e-12)


def test_interaction_proportional_to_coupling():
    a = build_interaction_env(ModelParams(2, 40, E_I=0.1, seed=4))
    b = build_interaction_env(ModelParams(2, 40, E_I=0.02, seed=4))
    assert np.allclose(a, 5 * b, rtol=1e-15, atol=0)
    norms = [np.linalg.norm(build_interaction_env(ModelParams(2, 40, E_I=c, seed=4))) for c in (0.1, 0.2, 0.4)]
    assert norms[1] == pytest.approx(2 * norms[0], rel=1e-14)
    assert norms[2] == pytest.approx(4 * norms[0], rel=1e-14)


def test_environment_semicircle_radius():
    eigs = np.linalg.eigvalsh(build_environment(ModelParams(2, 600, E_e=1.0, seed=0)))
    radius = 2 * np.sqrt(600 / 6)
    assert radius == 20.0
    assert -radius * 1.05 < eigs.min() and eigs.max() < radius * 1.05


def test_assemble_matches_kron_oracle():
    p = ModelParams(2, 3, E_e=0.8, E_I=0.3, E0_e=0.1, E0_I=-0.2, seed=17)
    ops = assemble_world(p)
    h_e = 0.8 * sample_hermitian(RandomMatrixSpec(3, 17, Label.ENVIRONMENT)) + 0.1 * np.eye(3)
    h_ei = 0.3 * sample_hermitian(RandomMatrixSpec(3, 17, Label.INTERACTION)) - 0.2 * np.eye(3)
    oracle = kron_oracle(sho_hamiltonian(2), position_operator(2), h_e, h_ei)
    assert np.abs(ops.H_w - oracle).max() < 1e-12
    assert np.array_equal(ops.H_w, ops.H_s_lift + ops.H_I_lift + ops.H_e_lift)
    for m in (ops.H_w, ops.H_s_lift, ops.H_e_lift, ops.H_I_lift):
        assert np.abs(m - m.conj().T).max() == 0


def test_decoupled_spectrum_is_sum():
    p = ModelParams(3, 8, E_e=1.0, E_I=0.0, seed=2)
    ops = assemble_world(p)
    e_s = np.arange(3) + 0.5
    e_e = np.linalg.eigvalsh(ops.H_e)
    sums = np.sort((e_s[:, None] + e_e[None, :]).ravel())
    assert np.allclose(np.linalg.eigvalsh(ops.H_w), sums, atol=1e-12)


def test_full_scale_dimension():
    assert ModelParams().N_w == 18000


def test_linearity_in_coupling():
    a = assemble_world(ModelParams(3, 6, E_I=0.05, seed=9))
    b = assemble_world(ModelParams(3, 6, E_I=0.10, seed=9))
    assert np.array_equal(b.H_I_lift, 2 * a.H_I_lift)
    assert np.array_equal(a.H_s_lift, b.H_s_lift)
    assert np.array_equal(a.H_e_lift, b.H_e_lift)


def test_product_state_index_round_trip():
    ops = assemble_world(ModelParams(4, 5, E_I=0.3, seed=1))
    for i in range(4):
        for j in range(5):
            psi = np.zeros(20, complex)
            psi[i * 5 + j] = 1
            assert expectation(ops.H_s_lift, psi) == i + 0.5


def test_expectation_oracles(rng):
    assert expectation(np.eye(6), random_state(rng, 6)) == pytest.approx(1.0, abs=1e-15)
    m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    m = m + m.conj().T
    w, v = np.linalg.eigh(m)
    assert expectation(m, v[:, 2]) == pytest.approx(w[2], abs=1e-12)
    psi = random_state(rng, 6)
    oracle = sum(np.conj(psi[i]) * m[i, j] * psi[j] for i in range(6) for j in range(6))
    assert abs(expectation(m, psi) - oracle.real) < 1e-12
    with pytest.raises(ValueError):
        expectation(m, psi[:5])


def test_factored_energies_match_dense(rng):
    ops = assemble_world(ModelParams(3, 7, E_e=0.7, E_I=0.4, seed=5))
    psi = random_state(rng, 21)
    e_s, e_e, e_i = ops.energies(psi)
    assert e_s == pytest.approx(expectation(ops.H_s_lift, psi), abs=1e-13)
    assert e_e == pytest.approx(expectation(ops.H_e_lift, psi), abs=1e-13)
    assert e_i == pytest.approx(expectation(ops.H_I_lift, psi), abs=1e-13)
    parts = ops.apply_parts(np.stack([psi, psi[::-1]], axis=1))
    for part, dense in zip(parts, (ops.H_s_lift, ops.H_e_lift, ops.H_I_lift)):
        assert np.allclose(part[:, 0], dense @ psi, atol=1e-13)


def test_memory_guard_names_bytes():
    with pytest.raises(ResourceError, match=str(18000 * 18000 * 16)):
        check_memory(18000, 1, cap=10**9)
