"""Moment generating functions, large deviations, and CLT quantities.

Finite-T generating functions of the counted increment Delta_y (and of the
pair (Delta_y, Delta_a)) are products of deformed maps. As T grows,
(1/T) log E e^{alpha Delta_y} converges to
Lambda(alpha) = int_0^1 log lambda^(alpha)(s) ds with lambda^(alpha)(s) the
spectral radius of L^(alpha)(s); this module evaluates Lambda on cached
grids, its first two derivatives at zero in closed form, its Legendre
transform with the finite support window [nu_minus, nu_plus], the
fluctuation-symmetry defects, and the closed-form limits available in the
exactly stationary (obstruction-free) case.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import simpson

from .linalg import (
    SuperOperator,
    hermitian_eig,
    herm_exp,
    unvec,
    vec,
)
from .model import RISModel, deformed_map, kraus_family
from .fullstats import MeasurementSetup, resolve_final_observable
from .spectral import growth_rates, invariant_state

DEFAULT_S_NODES = 201
DEFAULT_ALPHA_GRID = (-3.0, 2.0, 101)
SAFEGUARD_INTERVAL = (-50.0, 50.0)


# ---------------------------------------------------------------------------
# finite-T generating functions (product formulas)
# ---------------------------------------------------------------------------


def _decohered_initial(setup: MeasurementSetup) -> np.ndarray:
    return sum(P @ setup.rho_i @ P for P in setup.obs_i.projectors)


def mgf_delta_y(
    model: RISModel, setup: MeasurementSetup, T: int, alpha: complex, Y=None
) -> complex:
    """E e^{alpha Delta_y} = Tr( L^(a)(T/T)...L^(a)(1/T) sum_i pi_i rho_i pi_i )."""
    x = vec(_decohered_initial(setup))
    for k in range(1, T + 1):
        x = deformed_map(model, k / T, alpha, Y=Y).matrix @ x
    d = model.dim_sys
    return complex(np.trace(unvec(x, d)))


def mgf_pair(
    model: RISModel,
    setup: MeasurementSetup,
    T: int,
    alpha1: complex,
    alpha2: complex,
    Y=None,
) -> complex:
    """Joint E e^{alpha1 Delta_y + alpha2 Delta_a}, Delta_a = a_i - a_f.

    Tr( e^{-alpha2 A_f} L^(a1)-chain( sum_i e^{alpha2 a_i} pi_i rho_i pi_i ) ).
    """
    obs_f, _ = resolve_final_observable(model, setup, T)
    init = sum(
        np.exp(alpha2 * a) * (P @ setup.rho_i @ P)
        for a, P in zip(setup.obs_i.values, setup.obs_i.projectors)
    )
    x = vec(init)
    for k in range(1, T + 1):
        x = deformed_map(model, k / T, alpha1, Y=Y).matrix @ x
    final = sum(
        np.exp(-alpha2 * a) * P for a, P in zip(obs_f.values, obs_f.projectors)
    )
    d = model.dim_sys
    return complex(np.trace(final @ unvec(x, d)))


def mgf_varsigma(
    model: RISModel, setup: MeasurementSetup, T: int, alpha: complex, Y=None
) -> complex:
    """E e^{alpha varsigma} with varsigma = Delta_y - Delta_a."""
    return mgf_pair(model, setup, T, alpha, -alpha, Y=Y)


# ---------------------------------------------------------------------------
# the limiting cumulant functional Lambda
# ---------------------------------------------------------------------------


class LambdaEvaluator:
    """Cached evaluator of Lambda(alpha) = int_0^1 log lambda^(alpha)(s) ds.

    Per protocol node the Kraus kron-stacks and counting increments are
    precomputed once; each alpha then costs one batched eigenvalue sweep.
    Quadrature is composite Simpson on an odd uniform grid.
    """

    def __init__(self, model: RISModel, n_nodes: int = DEFAULT_S_NODES, Y=None):
        if n_nodes % 2 == 0:
            n_nodes += 1
        self.model = model
        self.s_grid = np.linspace(0.0, 1.0, n_nodes)
        d = model.dim_sys
        mats, dys = [], []
        for s in self.s_grid:
            fam = kraus_family(model, float(s), Y)
            mats.append(np.stack([np.kron(K.conj(), K) for K in fam.kraus]))
            dys.append(fam.dy)
        self._mats = np.stack(mats)  # (S, nK, d^2, d^2)
        self._dys = np.stack(dys)  # (S, nK)
        self._fams = None
        self._Y = Y
        self._cache: dict[float, float] = {}

    def lambda_nodes(self, alpha: float) -> np.ndarray:
        """lambda^(alpha)(s) on the protocol grid."""
        w = np.exp(float(alpha) * self._dys)
        M = np.einsum("sn,snab->sab", w, self._mats)
        ev = np.linalg.eigvals(M)
        return np.abs(ev).max(axis=1)

    def __call__(self, alpha: float) -> float:
        alpha = float(alpha)
        if alpha not in self._cache:
            self._cache[alpha] = float(
                simpson(np.log(self.lambda_nodes(alpha)), x=self.s_grid)
            )
        return self._cache[alpha]

    def derivative(self, alpha: float, h: float = 1e-5) -> float:
        return (self(alpha + h) - self(alpha - h)) / (2 * h)

    def support_window(self) -> tuple[float, float]:
        """(nu_minus, nu_plus) = integrated extreme counting increments."""
        lo = np.empty(self.s_grid.size)
        hi = np.empty(self.s_grid.size)
        for i, s in enumerate(self.s_grid):
            fam = kraus_family(self.model, float(s), self._Y)
            lo[i], hi[i] = growth_rates(fam.kraus, fam.dy)
        return (
            float(simpson(lo, x=self.s_grid)),
            float(simpson(hi, x=self.s_grid)),
        )


def lambda_derivatives_at_zero(
    model: RISModel, n_nodes: int = DEFAULT_S_NODES, Y=None
) -> tuple[float, float]:
    """(Lambda'(0), Lambda''(0)) via the closed-form node derivatives.

    At each node, with invariant state rho of L(s):
    l1 = sum_n dy_n Tr(K_n rho K_n*), and
    l2 = sum_n dy_n^2 Tr(K_n rho K_n*) + 2 sum_n dy_n Tr(K_n eta K_n*)
    with eta the unique traceless solution of
    (Id - L) eta = sum_n dy_n K_n rho K_n* - l1 rho. Then
    Lambda'(0) = int l1 and Lambda''(0) = int (l2 - l1^2).
    """
    if n_nodes % 2 == 0:
        n_nodes += 1
    s_grid = np.linspace(0.0, 1.0, n_nodes)
    d = model.dim_sys
    l1s = np.empty(n_nodes)
    l2s = np.empty(n_nodes)
    for i, s in enumerate(s_grid):
        fam = kraus_family(model, float(s), Y)
        L = SuperOperator.from_kraus(fam.kraus, trace_preserving=True)
        rho = invariant_state(L)
        first = sum(
            dy * np.real(np.trace(K @ rho @ K.conj().T))
            for dy, K in zip(fam.dy, fam.kraus)
        )
        rhs = sum(
            dy * (K @ rho @ K.conj().T) for dy, K in zip(fam.dy, fam.kraus)
        ) - first * rho
        A = np.eye(d * d, dtype=complex) - L.matrix
        eta0, *_ = np.linalg.lstsq(A, vec(rhs), rcond=None)
        eta = unvec(eta0, d)
        eta = eta - np.trace(eta) * rho  # fix the kernel component: traceless
        resid = np.abs(A @ vec(eta) - vec(rhs)).max()
        if resid > 1e-10:
            raise ValueError(f"perturbation solve residual {resid:.3e} at s={s}")
        second = sum(
            dy * dy * np.real(np.trace(K @ rho @ K.conj().T))
            for dy, K in zip(fam.dy, fam.kraus)
        ) + 2 * sum(
            dy * np.real(np.trace(K @ eta @ K.conj().T))
            for dy, K in zip(fam.dy, fam.kraus)
        )
        l1s[i] = first
        l2s[i] = second
    d1 = float(simpson(l1s, x=s_grid))
    d2 = float(simpson(l2s - l1s**2, x=s_grid))
    return d1, d2


# ---------------------------------------------------------------------------
# Legendre transform and fluctuation symmetries
# ---------------------------------------------------------------------------


def legendre_transform(
    ev: LambdaEvaluator,
    x: float,
    *,
    window: tuple[float, float] | None = None,
    interval: tuple[float, float] = SAFEGUARD_INTERVAL,
    tol: float = 1e-10,
) -> float:
    """Lambda*(x) = sup_alpha (alpha x - Lambda(alpha)).

    Returns +inf outside the support window [nu_minus, nu_plus]. Inside,
    the stationarity condition Lambda'(alpha) = x is solved by bisection on
    the safeguard interval; if the derivative does not bracket x there, the
    supremum over the interval endpoints is returned (a finite lower bound).
    """
    if window is None:
        window = ev.support_window()
    nu_lo, nu_hi = window
    edge = 1e-12 * (1.0 + abs(nu_lo) + abs(nu_hi))
    if x < nu_lo - edge or x > nu_hi + edge:
        return np.inf
    a_lo, a_hi = interval
    d_lo = ev.derivative(a_lo)
    d_hi = ev.derivative(a_hi)
    if not (d_lo <= x <= d_hi):
        return max(a_lo * x - ev(a_lo), a_hi * x - ev(a_hi))
    while a_hi - a_lo > tol * (1.0 + abs(a_lo) + abs(a_hi)):
        mid = 0.5 * (a_lo + a_hi)
        if ev.derivative(mid) < x:
            a_lo = mid
        else:
            a_hi = mid
    a = 0.5 * (a_lo + a_hi)
    return float(a * x - ev(a))


def gc_symmetry_defect(ev: LambdaEvaluator, alpha_grid=None) -> float:
    """max over the grid of |Lambda(alpha) - Lambda(-1-alpha)|."""
    if alpha_grid is None:
        lo, hi, n = DEFAULT_ALPHA_GRID
        alpha_grid = np.linspace(lo, hi, int(n))
    vals = np.array([ev(a) for a in alpha_grid])
    refl = np.array([ev(-1.0 - a) for a in alpha_grid])
    return float(np.abs(vals - refl).max())


def rate_function_symmetry_defect(
    ev: LambdaEvaluator, n_points: int = 21
) -> float:
    """max over an interior grid of |Lambda*(x) - (Lambda*(-x) - x)|.

    This is the rate-function form of the Lambda(alpha) = Lambda(-1-alpha)
    symmetry: Lambda*(x) = -x + Lambda*(-x). The grid is x = Lambda'(alpha)
    for alpha uniform in [-2, 1], so both x and -x are reached by
    stationary points inside the safeguard interval.
    """
    window = ev.support_window()
    worst = 0.0
    for a in np.linspace(-2.0, 1.0, n_points):
        x = ev.derivative(a)
        lhs = legendre_transform(ev, x, window=window)
        rhs = -x + legendre_transform(ev, -x, window=window)
        worst = max(worst, abs(lhs - rhs))
    return worst


def lln_mean(ev_or_model, **kwargs) -> float:
    """The law-of-large-numbers limit of Delta_y / T, i.e. Lambda'(0)."""
    if isinstance(ev_or_model, LambdaEvaluator):
        return ev_or_model.derivative(0.0)
    d1, _ = lambda_derivatives_at_zero(ev_or_model, **kwargs)
    return d1


def clt_check(delta_y: np.ndarray, T: int, d1: float, d2: float) -> dict:
    """Compare standardized samples of Delta_y against Normal(0, Lambda''(0)).

    Returns the KS distance, the sample mean of Delta_y / T, and its
    standard error.
    """
    from scipy.stats import kstest

    standardized = (np.asarray(delta_y) - T * d1) / np.sqrt(T)
    ks = kstest(standardized, "norm", args=(0.0, np.sqrt(d2))).statistic
    mean = float(np.mean(delta_y) / T)
    se = float(np.std(delta_y, ddof=1) / (T * np.sqrt(delta_y.size)))
    return {"ks_distance": float(ks), "mean_rate": mean, "mean_se": se}


# ---------------------------------------------------------------------------
# closed forms in the exactly stationary (obstruction-free) case
# ---------------------------------------------------------------------------


def stationary_pair_mgf_limit(
    rho_inv_0: np.ndarray,
    rho_inv_1: np.ndarray,
    rho_i: np.ndarray,
    alpha1: complex,
    alpha2: complex,
) -> complex:
    """Limiting joint MGF of (Delta_y, Delta_a) when the obstruction vanishes.

    Tr( rho_inv(0)^{-alpha1} rho_i^{1-alpha2} ) *
    Tr( rho_inv(1)^{1+alpha1+alpha2} ).
    """
    A = _herm_cpow(rho_inv_0, -alpha1) @ _herm_cpow(rho_i, 1.0 - alpha2)
    B = _herm_cpow(rho_inv_1, 1.0 + alpha1 + alpha2)
    return complex(np.trace(A) * np.trace(B))


def _herm_cpow(H: np.ndarray, p: complex) -> np.ndarray:
    w, V = hermitian_eig(H)
    if w.min() <= 0:
        raise ValueError("complex powers require a faithful (PD) state")
    return (V * np.exp(complex(p) * np.log(w))) @ V.conj().T


def stationary_varsigma_limit_law(
    rho_inv_0: np.ndarray, rho_i: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Atoms and weights of the limiting law of varsigma (obstruction-free).

    The limit MGF is Tr(rho_inv(0)^{-alpha} rho_i^{1+alpha}); with
    eigenpairs (t_j, v_j) of rho_inv(0) and (r_k, w_k) of rho_i, the law
    has atoms log r_k - log t_j with weights |<v_j|w_k>|^2 r_k, and its
    mean is the relative entropy S(rho_i | rho_inv(0)).
    """
    t, V = hermitian_eig(rho_inv_0)
    r, W = hermitian_eig(rho_i)
    atoms, weights = [], []
    ov = np.abs(V.conj().T @ W) ** 2
    for j in range(t.size):
        for k in range(r.size):
            atoms.append(np.log(r[k]) - np.log(t[j]))
            weights.append(ov[j, k] * r[k])
    return np.asarray(atoms), np.asarray(weights)


def stationary_log_mgf_theta(
    k_sys: np.ndarray, beta0: float, beta1: float, alpha: float
) -> float:
    """-theta^(alpha) = log of the accumulated normalization (obstruction-free).

    log of (Tr e^{-beta0 k})^{1+a} Tr e^{-(1+a) beta1 k}
    / [ (Tr e^{-beta1 k})^{1+a} Tr e^{-(1+a) beta0 k} ].
    """

    def z(b):
        return np.real(np.trace(herm_exp(k_sys, -b)))

    a = float(alpha)
    return float(
        (1 + a) * np.log(z(beta0))
        + np.log(z((1 + a) * beta1))
        - (1 + a) * np.log(z(beta1))
        - np.log(z((1 + a) * beta0))
    )
