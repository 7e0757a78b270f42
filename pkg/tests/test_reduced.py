import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acl_lab.hamiltonian import ModelParams, assemble_world, expectation
from acl_lab.reduced import (EnergyDistribution, InvalidDensityError, Space, bin_distribution,
                             effective_dimension, energy_distribution, entanglement_entropy,
                             partial_trace, schmidt_entropy, total_variation, world_energy_distribution)
from acl_lab.spectral import decompose, to_eigenbasis

from .conftest import random_state


def brute_partial_trace(psi, n_s, n_e, keep):
    rho = np.outer(psi, psi.conj())
    if keep == "s":
        out = np.zeros((n_s, n_s), complex)
        for a in range(n_s):
            for b in range(n_s):
                out[a, b] = sum(rho[a * n_e + i, b * n_e + i] for i in range(n_e))
    else:
        out = np.zeros((n_e, n_e), complex)
        for i in range(n_e):
            for j in range(n_e):
                out[i, j] = sum(rho[a * n_e + i, a * n_e + j] for a in range(n_s))
    return out


def test_product_state_is_pure():
    phi = np.array([0.6, 0.8j])
    chi = np.array([1, 1, 1j]) / math.sqrt(3)
    psi = np.kron(phi, chi)
    rho_s = partial_trace(psi, Space.SYSTEM, (2, 3)).matrix
    rho_e = partial_trace(psi, Space.ENVIRONMENT, (2, 3)).matrix
    assert np.allclose(rho_s, np.outer(phi, phi.conj()), atol=1e-15)
    assert np.allclose(rho_e, np.outer(chi, chi.conj()), atol=1e-15)
    assert entanglement_entropy(rho_s) == pytest.approx(0, abs=1e-12)


def test_bell_state():
    psi = np.array([1, 0, 0, 1]) / math.sqrt(2)
    rho = partial_trace(psi, Space.SYSTEM, (2, 2))
    assert np.allclose(rho.matrix, np.eye(2) / 2)
    assert entanglement_entropy(rho) == pytest.approx(math.log(2), abs=1e-14)
    assert entanglement_entropy(rho, base=2) == pytest.approx(1.0, abs=1e-14)


def test_maximally_mixed_entropy():
    assert entanglement_entropy(np.eye(7) / 7) == pytest.approx(math.log(7), abs=1e-13)


def test_brute_force_partial_trace(rng):
    for _ in range(5):
        psi = random_state(rng, 6)
        for keep, space in (("s", Space.SYSTEM), ("e", Space.ENVIRONMENT)):
            got = np.asarray(partial_trace(psi, space, (2, 3)))
            assert np.abs(got - brute_partial_trace(psi, 2, 3, keep)).max() < 1e-14


def test_invalid_density():
    with pytest.raises(InvalidDensityError, match="trace"):
        entanglement_entropy(np.eye(2) * 0.6)
    with pytest.raises(InvalidDensityError):
        entanglement_entropy(np.diag([1.1, -0.1]))
    with pytest.raises(ValueError):
        partial_trace(np.ones(5), Space.SYSTEM, (2, 3))


@settings(max_examples=40, deadline=None)
@given(n_s=st.integers(1, 5), n_e=st.integers(1, 9), seed=st.integers(0, 2**32 - 1))
def test_reduced_properties(n_s, n_e, seed):
    psi = random_state(np.random.default_rng(seed), n_s * n_e)
    rho_s = partial_trace(psi, Space.SYSTEM, (n_s, n_e)).matrix
    rho_e = partial_trace(psi, Space.ENVIRONMENT, (n_s, n_e)).matrix
    for rho in (rho_s, rho_e):
        assert np.abs(rho - rho.conj().T).max() < 1e-14
        assert abs(np.trace(rho) - 1) < 1e-12
        assert np.linalg.eigvalsh(rho).min() > -1e-12
    s_s, s_e = entanglement_entropy(rho_s), entanglement_entropy(rho_e)
    assert abs(s_s - s_e) < 1e-8
    assert abs(schmidt_entropy(psi, (n_s, n_e)) - s_s) < 1e-8
    assert -1e-12 <= s_s <= math.log(min(n_s, n_e)) + 1e-12


@pytest.fixture(scope="module")
def toy():
    ops = assemble_world(ModelParams(3, 10, E_e=0.5, E_I=0.2, seed=8))
    return ops, decompose(ops.H_w), decompose(ops.H_e), decompose(ops.H_s)


def test_energy_distributions_sum_to_one(toy, rng):
    ops, d, de, ds = toy
    psi = random_state(rng, 30)
    p_s = energy_distribution(partial_trace(psi, Space.SYSTEM, (3, 10)), ds)
    p_e = energy_distribution(partial_trace(psi, Space.ENVIRONMENT, (3, 10)), de)
    p_w = world_energy_distribution(to_eigenbasis(d, psi), d.eigenvalues)
    for p in (p_s, p_e, p_w):
        assert abs(p.total - 1) < 1e-12
        assert p.probabilities.min() >= 0
    # first moments reproduce the corresponding energies
    assert p_s.mean() == pytest.approx(expectation(ops.H_s_lift, psi), abs=1e-12)
    assert p_e.mean() == pytest.approx(expectation(ops.H_e_lift, psi), abs=1e-12)
    assert p_w.mean() == pytest.approx(expectation(ops.H_w, psi), abs=1e-12)


def test_world_distribution_of_eigenstate(toy):
    ops, d, *_ = toy
    p = world_energy_distribution(to_eigenbasis(d, d.eigenvectors[:, 4]))
    assert p.probabilities[4] == pytest.approx(1, abs=1e-12)
    assert effective_dimension(p) == pytest.approx(1, abs=1e-10)


def test_binning():
    dist = EnergyDistribution(np.array([0.0, 0.5, 1.0, 2.0]), np.array([0.1, 0.2, 0.3, 0.4]))
    b = bin_distribution(dist, 2)
    assert np.allclose(b.bin_edges, [0, 1, 2])
    # 1.0 opens the second bin, 2.0 closes it
    assert np.allclose(b.probabilities, [0.3, 0.7])
    assert b.total == pytest.approx(1.0)
    with pytest.raises(ValueError):
        effective_dimension(b)
    shared = bin_distribution(dist, 2, edges=[-1, 0.25, 3])
    assert np.allclose(shared.probabilities, [0.1, 0.9])


def test_effective_dimension_and_tv():
    assert effective_dimension(np.full(40, 1 / 40)) == pytest.approx(40)
    assert effective_dimension(np.array([1.0, 0, 0])) == 1.0
    with pytest.raises(ValueError):
        effective_dimension(np.zeros(3))
    p, q = np.array([1.0, 0]), np.array([0, 1.0])
    assert total_variation(p, q) == 1.0
    assert total_variation(p, p) == 0.0
    with pytest.raises(ValueError):
        total_variation(p, np.ones(3) / 3)
