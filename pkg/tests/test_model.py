import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from acl_lab import ACLModel, spectral
from acl_lab.hamiltonian import ResourceError, expectation
from acl_lab.model import cache_path

from .conftest import random_state


def test_params_round_trip():
    m = ACLModel(n_sys=5, n_env=20, coupling=0.3, seed=7)
    p = m.get_params()
    assert p["n_sys"] == 5 and p["coupling"] == 0.3 and p["seed"] == 7
    c = clone(m).set_params(coupling=0.5)
    assert c.coupling == 0.5 and m.coupling == 0.3
    mp = m.model_params()
    assert ACLModel.from_params(mp).model_params() == mp
    assert mp.N_w == 100


def test_invalid_params():
    with pytest.raises(ValueError):
        ACLModel(n_sys=1).fit()
    with pytest.raises(ValueError):
        ACLModel(n_sys=3, n_env=4, coupling=float("nan")).fit()
    with pytest.raises(ValueError):
        ACLModel(n_sys=3, n_env=4, seed=-1).fit()


def test_not_fitted():
    with pytest.raises(NotFittedError):
        ACLModel().transform(np.ones(18000))


def test_memory_cap_raises():
    with pytest.raises(ResourceError):
        ACLModel(n_sys=10, n_env=100, memory_cap=10_000).fit()


def test_transform_inverse(small_model, rng):
    X = np.stack([random_state(rng, 120) for _ in range(3)])
    A = small_model.transform(X)
    assert A.shape == (3, 120)
    assert np.allclose(np.linalg.norm(A, axis=1), 1, atol=1e-12)
    assert np.abs(small_model.inverse_transform(A) - X).max() < 1e-12
    v = small_model.decomposition_.eigenvectors[:, 9]
    assert abs(small_model.transform(v)[0, 9]) == pytest.approx(1, abs=1e-12)


def test_predict_is_time_average(small_model, rng):
    psi = random_state(rng, 120)
    pred = small_model.predict(psi)[0]
    ops = small_model.operators_
    # long-time average of <H_s(t)> over a dense, long grid approaches the prediction
    traj = small_model.evolve(psi, np.linspace(0, 2e4, 4000))
    avg = np.mean([expectation(ops.H_s_lift, p) for p in traj])
    assert abs(avg - pred[0]) < 0.02
    assert pred.sum() == pytest.approx(expectation(ops.H_s_lift + ops.H_e_lift + ops.H_I_lift, psi), abs=1e-10)
    assert small_model.decomposition_report_["max_residual"] < 1e-8


def test_cache_reuse(tmp_path):
    a = ACLModel(n_sys=3, n_env=15, coupling=0.2, seed=1, cache_dir=tmp_path).fit()
    path = cache_path(tmp_path, a.params_)
    assert path.exists()
    raw = path.read_bytes()
    b = ACLModel(n_sys=3, n_env=15, coupling=0.2, seed=1, cache_dir=tmp_path).fit()
    assert b.decomposition_report_ is None
    assert np.array_equal(a.decomposition_.eigenvectors, b.decomposition_.eigenvectors)
    # a rebuild from scratch reproduces the file byte for byte
    path.unlink()
    ACLModel(n_sys=3, n_env=15, coupling=0.2, seed=1, cache_dir=tmp_path).fit()
    assert path.read_bytes() == raw
    # other parameters never pick up this cache
    assert cache_path(tmp_path, ACLModel(n_sys=3, n_env=15, coupling=0.3, seed=1).model_params()) != path


def test_corrupt_cache_is_rebuilt(tmp_path):
    m = ACLModel(n_sys=3, n_env=10, coupling=0.2, cache_dir=tmp_path).fit()
    path = cache_path(tmp_path, m.params_)
    path.write_bytes(b"junk")
    again = ACLModel(n_sys=3, n_env=10, coupling=0.2, cache_dir=tmp_path).fit()
    assert again.decomposition_report_ is not None
    assert spectral.read_cache(path).dim == 30
