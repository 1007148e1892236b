import numpy as np
import pytest

from rislab.model import RISModel


def random_hermitian(rng, d):
    X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (X + X.conj().T)


def random_faithful_state(rng, d=2, floor=0.05):
    X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = X @ X.conj().T + floor * np.eye(d)
    return rho / np.trace(rho).real


def random_small_model(rng):
    """A random 2x2-system / 2x2-probe model with well-separated probe levels."""
    h_sys = random_hermitian(rng, 2)
    gap = 0.5 + rng.random()
    base = rng.standard_normal()
    V = np.linalg.qr(
        rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    )[0]
    h_env = V @ np.diag([base, base + gap]).astype(complex) @ V.conj().T
    v = random_hermitian(rng, 4)
    beta = 0.3 + 2.0 * rng.random()
    return RISModel(
        dim_sys=2,
        dim_env=2,
        h_sys=h_sys,
        h_env=lambda s, _m=h_env: _m,
        coupling=lambda s, _m=v: _m,
        beta=lambda s, _b=beta: _b,
        tau=0.2 + rng.random(),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
