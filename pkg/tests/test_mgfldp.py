import numpy as np
import pytest

from rislab import fullstats as fs
from rislab import mgfldp as mg
from rislab import model as mod
from rislab.spectral import invariant_state

from conftest import random_faithful_state

# frozen high-precision oracles for the full-dipole preset with schedule 1,
# converged in the quadrature node count (201 through 1601 nodes agree)
FD1_D1 = 0.24016263437603871
FD1_D2 = 0.5297882642092488


@pytest.fixture(scope="module")
def fd_ev():
    return mg.LambdaEvaluator(mod.fd_model(), 201)


def test_lambda_zero(fd_ev):
    assert abs(fd_ev(0.0)) < 1e-12


def test_lambda_derivatives_closed_form():
    d1, d2 = mg.lambda_derivatives_at_zero(mod.fd_model(), 201)
    assert abs(d1 - FD1_D1) < 1e-9
    assert abs(d2 - FD1_D2) < 1e-9
    assert d2 > 0


def test_lambda_derivatives_match_finite_difference(fd_ev):
    """Closed-form perturbative route versus central differences of Lambda."""
    d1, d2 = mg.lambda_derivatives_at_zero(mod.fd_model(), 201)
    h = 1e-4
    fd1 = (fd_ev(h) - fd_ev(-h)) / (2 * h)
    fd2 = (fd_ev(h) - 2 * fd_ev(0.0) + fd_ev(-h)) / h**2
    assert abs(d1 - fd1) < 1e-7
    assert abs(d2 - fd2) < 1e-5


def test_lambda_convex(fd_ev):
    grid = np.linspace(-3.0, 2.0, 26)
    vals = np.array([fd_ev(a) for a in grid])
    second = vals[:-2] - 2 * vals[1:-1] + vals[2:]
    assert second.min() > -1e-10


def test_support_window(fd_ev):
    lo, hi = fd_ev.support_window()
    # extreme counted increments are +/- beta(s) * E0 integrated over s,
    # with E0 = 0.8 and int beta = 2: the window is (-1.6, 1.6)
    assert abs(hi - 1.6) < 1e-9
    assert abs(lo + 1.6) < 1e-9


def test_gc_symmetry(fd_ev):
    assert mg.gc_symmetry_defect(fd_ev) < 1e-12


def test_rate_function_symmetry(fd_ev):
    assert mg.rate_function_symmetry_defect(fd_ev, n_points=9) < 1e-6


def test_legendre_basics(fd_ev):
    window = fd_ev.support_window()
    assert mg.legendre_transform(fd_ev, 5.0, window=window) == np.inf
    assert mg.legendre_transform(fd_ev, -5.0, window=window) == np.inf
    x0 = fd_ev.derivative(0.0)
    assert abs(mg.legendre_transform(fd_ev, x0, window=window)) < 1e-8
    # Lambda* is nonnegative and grows away from the LLN mean
    for a in (-1.0, 0.8):
        x = fd_ev.derivative(a)
        val = mg.legendre_transform(fd_ev, x, window=window)
        assert val >= -1e-10
        assert abs(val - (a * x - fd_ev(a))) < 1e-7


def test_mgf_product_matches_enumeration():
    m = mod.fd_model()
    setup = fs.entropic_setup(mod.gibbs_state(m.h_sys, m.beta(0.0)))
    meas = fs.enumerate_measure(m, setup, 3)
    for alpha in (-1.0, 0.4, 1.0):
        prod = mg.mgf_delta_y(m, setup, 3, alpha)
        enum = meas.mgf(alpha)
        assert abs(prod - enum) < 1e-12
    for a1, a2 in ((0.5, -0.5), (-0.3, 0.7)):
        assert abs(mg.mgf_pair(m, setup, 3, a1, a2) - meas.pair_mgf(a1, a2)) < 1e-12
        assert abs(
            mg.mgf_varsigma(m, setup, 3, a1)
            - meas.pair_mgf(a1, -a1)
        ) < 1e-12


def test_lln_mean(fd_ev):
    assert abs(mg.lln_mean(fd_ev) - FD1_D1) < 1e-6


def test_clt_check_on_gaussian_samples(rng):
    d1, d2 = 0.24, 0.53
    T = 400
    samples = T * d1 + np.sqrt(T * d2) * rng.standard_normal(5000)
    out = mg.clt_check(samples, T, d1, d2)
    assert out["ks_distance"] < 0.03
    assert abs(out["mean_rate"] - d1) < 4 * out["mean_se"]


def test_stationary_pair_mgf_limit_explicit(rng):
    """The exchange-preset limit law against the transcribed explicit MGF."""
    m = mod.rwa_model()
    rho_i = random_faithful_state(rng)
    rho0 = invariant_state(mod.reduced_map(m, 0.0))
    b0, E0 = float(m.beta(0.0)), 0.8
    r, V = np.linalg.eigh(rho_i)
    for alpha in (-0.8, 0.3, 1.1):
        explicit = (1 + np.exp(-b0 * E0)) ** alpha * sum(
            r[k] ** (1 + alpha)
            * (abs(V[0, k]) ** 2 + abs(V[1, k]) ** 2 * np.exp(alpha * b0 * E0))
            for k in range(2)
        )
        rho1 = invariant_state(mod.reduced_map(m, 1.0))
        lim = mg.stationary_pair_mgf_limit(rho0, rho1, rho_i, alpha, -alpha)
        assert abs(lim - explicit) < 1e-10


def test_stationary_varsigma_limit_law(rng):
    m = mod.rwa_model()
    rho_i = random_faithful_state(rng)
    rho0 = invariant_state(mod.reduced_map(m, 0.0))
    atoms, weights = mg.stationary_varsigma_limit_law(rho0, rho_i)
    assert abs(weights.sum() - 1.0) < 1e-12
    mean = float(np.sum(weights * atoms))
    assert abs(mean - fs.relative_entropy(rho_i, rho0)) < 1e-12
    # the MGF of the atomic law matches the limit pair MGF
    for alpha in (-0.5, 0.7):
        mgf_atoms = float(np.sum(weights * np.exp(alpha * atoms)))
        rho1 = invariant_state(mod.reduced_map(m, 1.0))
        lim = mg.stationary_pair_mgf_limit(rho0, rho1, rho_i, alpha, -alpha).real
        assert abs(mgf_atoms - lim) < 1e-10


def test_stationary_log_mgf_theta_zero_at_alpha_zero():
    m = mod.rwa_model()
    k = mod.rwa_k_sys(m)
    out = mg.stationary_log_mgf_theta(k, float(m.beta(0.0)), float(m.beta(1.0)), 0.0)
    assert abs(out) < 1e-14


def test_finite_T_mgf_converges_to_limit(rng):
    m = mod.rwa_model()
    rho_i = random_faithful_state(rng)
    setup = fs.entropic_setup(rho_i)
    rho0 = invariant_state(mod.reduced_map(m, 0.0))
    rho1 = invariant_state(mod.reduced_map(m, 1.0))
    a1, a2 = 0.5, -0.5
    lim = mg.stationary_pair_mgf_limit(rho0, rho1, rho_i, a1, a2).real
    errs = [
        abs(mg.mgf_pair(m, setup, T, a1, a2).real - lim) for T in (50, 100, 200)
    ]
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] < 0.05
