"""Repeated interaction system (RIS) models.

A model couples a fixed finite-dimensional system to a chain of fresh
thermal probes. During step k of a length-T protocol the pair evolves for
a time tau under exp(-i*tau*(h_sys + h_env(s) + v(s))) at s = k/T, with
the probe prepared in the Gibbs state of h_env(s) at inverse temperature
beta(s). Tracing out the probe yields the reduced map L(s); two-point
counting with respect to a probe observable Y yields the deformed maps
L^(alpha)(s) through an exponentially weighted Kraus family.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linalg import (
    LinalgError,
    SuperOperator,
    as_complex,
    assert_hermitian,
    herm_exp,
    herm_power,
    hermitian_eig,
    partial_trace_env,
    tensor_product,
    vec,
)
from .spectral import invariant_state

# ---------------------------------------------------------------------------
# schedules on [0, 1]
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantSchedule:
    value: float

    def __call__(self, s):
        return self.value + 0.0 * np.asarray(s, dtype=float)


@dataclass(frozen=True)
class TanhPolySchedule:
    """sum_k c_k * tanh(r_k * s) + sum_j p_j * s**j (poly in ascending order)."""

    tanh_terms: tuple[tuple[float, float], ...] = ()
    poly: tuple[float, ...] = ()

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c, r in self.tanh_terms:
            out = out + c * np.tanh(r * s)
        for j, p in enumerate(self.poly):
            out = out + p * s**j
        return out


@dataclass(frozen=True)
class TabulatedSchedule:
    """Natural cubic spline through (nodes, values)."""

    nodes: tuple[float, ...]
    values: tuple[float, ...]

    def __call__(self, s):
        from scipy.interpolate import CubicSpline

        spline = CubicSpline(self.nodes, self.values, bc_type="natural")
        return spline(np.asarray(s, dtype=float))


Schedule = ConstantSchedule | TanhPolySchedule | TabulatedSchedule


def beta_schedule_1() -> TanhPolySchedule:
    """Smooth increasing schedule 2*(3 + 4*tanh(2s)) / (3 + 2*log(cosh 2))."""
    denom = 3.0 + 2.0 * np.log(np.cosh(2.0))
    return TanhPolySchedule(
        tanh_terms=((8.0 / denom, 2.0),), poly=(6.0 / denom,)
    )


def beta_schedule_2() -> TanhPolySchedule:
    """Non-monotone schedule with the same endpoints and mean as schedule 1."""
    return TanhPolySchedule(
        tanh_terms=((35.483, 2.0), (-141.929, 0.5)),
        poly=(1.061, -17.808, 93.5, -42.945),
    )


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RISModel:
    """A repeated interaction model with protocol parameter s in [0, 1].

    ``h_env`` and ``coupling`` are functions of s returning Hermitian
    matrices (dim_env x dim_env and the full dim_sys*dim_env square,
    respectively); ``beta`` is the inverse-temperature schedule.
    """

    dim_sys: int
    dim_env: int
    h_sys: np.ndarray
    h_env: Callable[[float], np.ndarray]
    coupling: Callable[[float], np.ndarray]
    beta: Callable[[float], float]
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "h_sys", assert_hermitian(self.h_sys))
        if self.h_sys.shape != (self.dim_sys, self.dim_sys):
            raise LinalgError("h_sys has wrong shape")


def gibbs_state(h: np.ndarray, beta: float) -> np.ndarray:
    """exp(-beta*h) / Tr exp(-beta*h)."""
    g = herm_exp(h, -float(beta))
    return g / np.trace(g).real


def probe_state(model: RISModel, s: float) -> np.ndarray:
    return gibbs_state(model.h_env(s), model.beta(s))


def total_hamiltonian(model: RISModel, s: float) -> np.ndarray:
    dS, dE = model.dim_sys, model.dim_env
    hE = assert_hermitian(model.h_env(s))
    V = assert_hermitian(model.coupling(s))
    return (
        tensor_product(model.h_sys, np.eye(dE))
        + tensor_product(np.eye(dS), hE)
        + V
    )


def joint_unitary(model: RISModel, s: float, tau: float | None = None) -> np.ndarray:
    """exp(-i*tau*(h_sys + h_env(s) + v(s))) on the system-probe pair."""
    if tau is None:
        tau = model.tau
    return herm_exp(total_hamiltonian(model, s), -1j * tau)


# ---------------------------------------------------------------------------
# Kraus families and (deformed) reduced maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KrausFamily:
    """Kraus decomposition of the reduced map indexed by probe transitions.

    ``kraus[n]`` maps the system for the probe transition
    psi_in[n] -> psi_out[n] in the eigenbasis of the counting observable Y;
    ``dy[n] = y_out[n] - y_in[n]`` is the counted increment and
    ``xi_probs[n]`` the probability of the initial probe eigenvector under
    the probe state.
    """

    kraus: tuple[np.ndarray, ...]
    dy: np.ndarray
    in_index: np.ndarray
    out_index: np.ndarray
    y_eigenvalues: np.ndarray
    basis: np.ndarray
    xi_probs: np.ndarray


def default_counting_observable(model: RISModel, s: float) -> np.ndarray:
    """Y = beta(s) * h_env(s), the entropic counting observable."""
    return float(model.beta(s)) * assert_hermitian(model.h_env(s))


def kraus_family(
    model: RISModel, s: float, Y: np.ndarray | None = None
) -> KrausFamily:
    """Kraus operators K_ij = (Id x <psi_j|) U (Id x xi^{1/2} |psi_i>).

    psi is the eigenbasis of Y and xi the probe Gibbs state; the reduced
    map is X -> sum_ij K_ij X K_ij*.
    """
    dS, dE = model.dim_sys, model.dim_env
    if Y is None:
        Y = default_counting_observable(model, s)
    y, psi = hermitian_eig(Y)
    xi = probe_state(model, s)
    xi_half = herm_power(xi, 0.5)
    U4 = joint_unitary(model, s).reshape(dS, dE, dS, dE)
    phi = xi_half @ psi  # columns: xi^{1/2} psi_i
    ops, dys, iin, iout, probs = [], [], [], [], []
    for i in range(dE):
        p_i = float(np.real(psi[:, i].conj() @ xi @ psi[:, i]))
        for j in range(dE):
            K = np.einsum("e,menf,f->mn", psi[:, j].conj(), U4, phi[:, i])
            ops.append(K)
            dys.append(y[j] - y[i])
            iin.append(i)
            iout.append(j)
            probs.append(p_i)
    return KrausFamily(
        kraus=tuple(ops),
        dy=np.asarray(dys, dtype=float),
        in_index=np.asarray(iin, dtype=int),
        out_index=np.asarray(iout, dtype=int),
        y_eigenvalues=np.asarray(y, dtype=float),
        basis=psi,
        xi_probs=np.asarray(probs, dtype=float),
    )


def reduced_map(model: RISModel, s: float) -> SuperOperator:
    """The trace-preserving reduced map L(s)."""
    fam = kraus_family(model, s)
    return SuperOperator.from_kraus(fam.kraus, trace_preserving=True)


def deformed_map(
    model: RISModel,
    s: float,
    alpha: complex,
    Y: np.ndarray | None = None,
    fam: KrausFamily | None = None,
) -> SuperOperator:
    """The deformed map L^(alpha)(s): X -> sum_n e^{alpha*dy_n} K_n X K_n*.

    For real alpha this is completely positive with Kraus operators
    e^{alpha*dy_n/2} K_n; for complex alpha only the matrix is meaningful.
    """
    if fam is None:
        fam = kraus_family(model, s, Y)
    alpha = complex(alpha)
    if alpha.imag == 0.0:
        weighted = [
            np.exp(alpha.real * dy / 2.0) * K for dy, K in zip(fam.dy, fam.kraus)
        ]
        return SuperOperator.from_kraus(
            weighted, trace_preserving=bool(alpha == 0)
        )
    d = model.dim_sys
    mat = np.zeros((d * d, d * d), dtype=complex)
    for dy, K in zip(fam.dy, fam.kraus):
        mat += np.exp(alpha * dy) * np.kron(K.conj(), K)
    return SuperOperator(dim=d, matrix=mat)


def deformed_map_bare(
    model: RISModel, s: float, alpha: complex, Y: np.ndarray | None = None
) -> SuperOperator:
    """The deformed map from its defining expression (cross-check route).

    X -> Tr_env( e^{alpha Y} U (X x xi) e^{-alpha Y} U* ), evaluated by
    applying the map to the matrix units. Coincides with the weighted-Kraus
    route whenever Y commutes with the probe state.
    """
    dS, dE = model.dim_sys, model.dim_env
    if Y is None:
        Y = default_counting_observable(model, s)
    U = joint_unitary(model, s)
    xi = probe_state(model, s)
    ep = herm_exp(Y, complex(alpha))
    em = herm_exp(Y, -complex(alpha))
    A = tensor_product(np.eye(dS), ep) @ U
    B = tensor_product(np.eye(dS), em) @ U.conj().T
    mat = np.zeros((dS * dS, dS * dS), dtype=complex)
    for k in range(dS):
        for l in range(dS):
            E = np.zeros((dS, dS), dtype=complex)
            E[k, l] = 1.0
            out = partial_trace_env(A @ tensor_product(E, xi) @ B, dS, dE)
            mat[:, k + dS * l] = vec(out)
    return SuperOperator(dim=dS, matrix=mat)


def deformed_adjoint_map(
    model: RISModel, s: float, alpha: complex, Y: np.ndarray | None = None
) -> SuperOperator:
    """Adjoint of the deformed map from its closed-form expression.

    X -> Tr_env( e^{-(conj(alpha) Y + beta h_env)} U* (X x xi)
                 e^{conj(alpha) Y + beta h_env} U ).
    """
    dS, dE = model.dim_sys, model.dim_env
    if Y is None:
        Y = default_counting_observable(model, s)
    U = joint_unitary(model, s)
    xi = probe_state(model, s)
    G = np.conjugate(complex(alpha)) * as_complex(Y) + float(model.beta(s)) * as_complex(
        model.h_env(s)
    )
    # G is Hermitian only for real alpha; use the general exponential
    from scipy.linalg import expm

    ep = expm(G)
    em = expm(-G)
    A = tensor_product(np.eye(dS), em) @ U.conj().T
    B = tensor_product(np.eye(dS), ep) @ U
    mat = np.zeros((dS * dS, dS * dS), dtype=complex)
    for k in range(dS):
        for l in range(dS):
            E = np.zeros((dS, dS), dtype=complex)
            E[k, l] = 1.0
            out = partial_trace_env(A @ tensor_product(E, xi) @ B, dS, dE)
            mat[:, k + dS * l] = vec(out)
    return SuperOperator(dim=dS, matrix=mat)


# ---------------------------------------------------------------------------
# structural diagnostics
# ---------------------------------------------------------------------------


def stationary_obstruction(model: RISModel, s: float) -> np.ndarray:
    """X(s) = U (rho_inv x xi) U* - rho_inv x xi.

    Vanishes identically in s exactly when the dynamics admits an exactly
    stationary family of product states (the structural degenerate case).
    """
    rho_inv = invariant_state(reduced_map(model, s))
    U = joint_unitary(model, s)
    P = tensor_product(rho_inv, probe_state(model, s))
    return U @ P @ U.conj().T - P


def obstruction_norm(model: RISModel, s_grid) -> np.ndarray:
    """Max-entry norm of the stationary obstruction along a protocol grid."""
    return np.asarray(
        [np.abs(stationary_obstruction(model, s)).max() for s in np.atleast_1d(s_grid)]
    )


def commuting_effective_hamiltonian(
    model: RISModel, s: float, k_sys: np.ndarray
) -> float:
    """Defect max|[k_sys + h_env, U]|; zero certifies the degenerate case."""
    dS, dE = model.dim_sys, model.dim_env
    H = tensor_product(assert_hermitian(k_sys), np.eye(dE)) + tensor_product(
        np.eye(dS), assert_hermitian(model.h_env(s))
    )
    U = joint_unitary(model, s)
    return float(np.abs(H @ U - U @ H).max())


def tri_symmetry_defect(model: RISModel, s: float, alphas) -> float:
    """max over alpha of |spr L^(alpha) - spr L^(-1-alpha)|.

    Vanishes for time-reversal invariant models (all data real in a common
    basis).
    """
    fam = kraus_family(model, s)
    worst = 0.0
    for a in np.atleast_1d(alphas):
        la = _spr(deformed_map(model, s, float(a), fam=fam))
        lb = _spr(deformed_map(model, s, -1.0 - float(a), fam=fam))
        worst = max(worst, abs(la - lb))
    return worst


def _spr(L: SuperOperator) -> float:
    return float(np.abs(np.linalg.eigvals(L.matrix)).max())


# ---------------------------------------------------------------------------
# worked-example presets
# ---------------------------------------------------------------------------

_LOWERING = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)


def _preset(
    beta: Schedule,
    coupling_matrix: np.ndarray,
    *,
    e_sys: float = 0.9,
    e_env: float = 0.8,
    lam: float = 2.0,
    tau: float = 0.5,
) -> RISModel:
    h_sys = e_sys * (_LOWERING.conj().T @ _LOWERING)
    h_env_mat = e_env * (_LOWERING.conj().T @ _LOWERING)
    v = lam * coupling_matrix
    return RISModel(
        dim_sys=2,
        dim_env=2,
        h_sys=h_sys,
        h_env=lambda s: h_env_mat,
        coupling=lambda s: v,
        beta=beta,
        tau=tau,
    )


def rwa_model(beta: Schedule | None = None, **kwargs) -> RISModel:
    """Two-level system and probes with rotating-wave (exchange) coupling.

    v = (1/2)(a* x b + a x b*), scaled by the coupling constant.
    """
    if beta is None:
        beta = beta_schedule_1()
    a = _LOWERING
    v = 0.5 * (
        tensor_product(a.conj().T, a) + tensor_product(a, a.conj().T)
    )
    return _preset(beta, v, **kwargs)


def fd_model(beta: Schedule | None = None, **kwargs) -> RISModel:
    """Two-level system and probes with full dipole coupling.

    v = (1/2)(a + a*) x (b + b*), scaled by the coupling constant.
    """
    if beta is None:
        beta = beta_schedule_1()
    x = _LOWERING + _LOWERING.conj().T
    v = 0.5 * tensor_product(x, x)
    return _preset(beta, v, **kwargs)


def rwa_k_sys(model: RISModel) -> np.ndarray:
    """The system observable making the exchange model exactly stationary.

    k_sys = (e_env / e_sys) * h_sys, valid for the rotating-wave preset
    with constant probe Hamiltonian.
    """
    hE = model.h_env(0.0)
    e_env = float(np.real(hE[1, 1] - hE[0, 0]))
    e_sys = float(np.real(model.h_sys[1, 1] - model.h_sys[0, 0]))
    return (e_env / e_sys) * model.h_sys
