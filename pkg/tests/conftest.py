import warnings

import numpy as np
import pytest

from acl_lab import experiments as ex
from acl_lab.model import ACLModel
from acl_lab.oscillator import TruncationWarning

DESK = dict(n_sys=10, n_env=120, env_scale=0.5)
DESK_TARGET = 5.0
WEAK, INTERMEDIATE, STRONG = 0.007, 0.1, 1.0


def desk_ics():
    return [ex.InitialConditionSpec(i, DESK_TARGET) for i in ex.DESK_ENV_INDICES]


def random_state(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


@pytest.fixture(autouse=True)
def _quiet_truncation():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        yield


@pytest.fixture(scope="session")
def desk_models():
    """Fitted desk-scale models keyed by coupling (built lazily)."""
    cache = {}

    def get(coupling, seed=0):
        key = (coupling, seed)
        if key not in cache:
            cache[key] = ACLModel(coupling=coupling, seed=seed, **DESK).fit()
        return cache[key]

    return get


@pytest.fixture(scope="session")
def small_model():
    return ACLModel(n_sys=4, n_env=30, env_scale=0.5, coupling=0.1, seed=3).fit()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line, print it, then assert."""

    def check(number, title, ok, detail=""):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    def skip(number, title, reason):
        line = f"criterion {number}: NOT RUN  {title}  ({reason})"
        ACCEPTANCE_LINES.append(line)
        pytest.skip(reason)

    check.skip = skip
    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
