import contextlib

import numpy as np
import pytest

from omrmatmul.bfv import HeParams, gen_rotation_key, keygen, load_params
from omrmatmul.modring import generate_ntt_primes

_criteria = []


@pytest.fixture
def criterion():
    """Context manager recording one acceptance criterion as PASS or FAIL."""

    @contextlib.contextmanager
    def record(label):
        try:
            yield
        except BaseException:
            _criteria.append((label, False))
            raise
        _criteria.append((label, True))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok in _criteria:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}")


@pytest.fixture(scope="session")
def desk():
    return load_params("desk")


@pytest.fixture(scope="session")
def desk_sk(desk):
    return keygen(desk, 11)


@pytest.fixture(scope="session")
def desk_keys(desk, desk_sk):
    cache = {}

    def get(*shifts):
        for s in shifts:
            if s not in cache:
                cache[s] = gen_rotation_key(desk_sk, s, desk, 11)
        return {s: cache[s] for s in shifts}

    return get


@pytest.fixture(scope="session")
def tiny():
    """n=64, t=257, two 30-bit ciphertext limbs and one special limb."""
    q = generate_ntt_primes(30, 3, 64)
    return HeParams(64, 257, q[:2], q[2:], dnum=2, seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
