import os

import numpy as np
import pytest

from lindred.generator import LindbladGenerator, OutputMap, QSOModel
from lindred.opalg import random_hermitian

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)
EYE2 = np.eye(2, dtype=complex)
LOWER = np.array([[0, 1], [0, 0]], dtype=complex)   # maps the excited level down


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_lindblad(rng, n, n_noise=1):
    noise = tuple(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
                  for _ in range(n_noise))
    return LindbladGenerator(random_hermitian(rng, n), noise)


def random_qso(rng, n, n_noise=1, n_out=2, n_init=1):
    gen = random_lindblad(rng, n, n_noise)
    outs = tuple(random_hermitian(rng, n) for _ in range(n_out))
    labels = tuple(f"O{i}" for i in range(n_out))
    inits = []
    for _ in range(n_init):
        g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        rho = g @ g.conj().T + 1e-3 * np.eye(n)
        inits.append(rho / np.trace(rho).real)
    return QSOModel(generator=gen, output=OutputMap(ops=outs, labels=labels),
                    initial_set=tuple(inits))


def long_tests_enabled() -> bool:
    return os.environ.get("LINDRED_LONG", "") not in ("", "0")


requires_long = pytest.mark.skipif(
    not long_tests_enabled(), reason="set LINDRED_LONG=1 to run")
