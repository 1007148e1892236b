"""Two-time measurement statistics of repeated interaction protocols.

A trajectory consists of an initial projective measurement of A_i on the
system, per-step projective measurements of the counting observable Y on
each probe before and after its interaction, and a final measurement of
A_f on the system. This module evaluates forward and backward trajectory
probabilities exactly (with prefix/suffix sharing over the full record
tree), checks the trajectory-level balance identity, samples the forward
measure with reproducible counter-based randomness, and provides the
entropy functionals entering the Landauer-type step balance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    assert_hermitian,
    herm_log,
    hermitian_eig,
    partial_trace_env,
    partial_trace_sys,
    tensor_product,
    unvec,
    vec,
)
from .model import (
    RISModel,
    default_counting_observable,
    joint_unitary,
    probe_state,
    reduced_map,
)

GROUP_TOL = 1e-9
ENUMERATION_GUARD = 10_000_000


class FullStatsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# observables with grouped spectra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralObservable:
    """A Hermitian observable with eigenvalues grouped into distinct outcomes."""

    matrix: np.ndarray
    values: np.ndarray
    projectors: tuple[np.ndarray, ...]

    @classmethod
    def from_matrix(cls, A: np.ndarray, tol: float = GROUP_TOL) -> "SpectralObservable":
        A = assert_hermitian(A)
        w, V = hermitian_eig(A)
        scale = tol * (1.0 + np.abs(w).max())
        values: list[float] = []
        projectors: list[np.ndarray] = []
        current = [0]
        for i in range(1, w.size):
            if w[i] - w[current[-1]] <= scale:
                current.append(i)
            else:
                values.append(float(np.mean(w[current])))
                projectors.append(V[:, current] @ V[:, current].conj().T)
                current = [i]
        values.append(float(np.mean(w[current])))
        projectors.append(V[:, current] @ V[:, current].conj().T)
        return cls(
            matrix=A,
            values=np.asarray(values),
            projectors=tuple(projectors),
        )

    @property
    def n_outcomes(self) -> int:
        return len(self.projectors)

    def dims(self) -> np.ndarray:
        return np.array([np.trace(P).real for P in self.projectors])


@dataclass(frozen=True)
class MeasurementSetup:
    """Initial state with initial and final system observables.

    ``obs_f`` is either a SpectralObservable or the string "log_rho_f",
    meaning A_f = -log(rho_f) with rho_f the exact reduced evolution of
    rho_i over the protocol length at hand (recomputed per T).
    """

    rho_i: np.ndarray
    obs_i: SpectralObservable
    obs_f: SpectralObservable | str
    entropic: bool = False


def entropic_setup(rho_i: np.ndarray) -> MeasurementSetup:
    """The entropy-production setup A_i = -log rho_i, A_f = -log rho_f."""
    rho_i = assert_hermitian(rho_i)
    return MeasurementSetup(
        rho_i=rho_i,
        obs_i=SpectralObservable.from_matrix(-herm_log(rho_i)),
        obs_f="log_rho_f",
        entropic=True,
    )


def evolved_state(model: RISModel, rho_i: np.ndarray, T: int) -> np.ndarray:
    """rho_f = L(T/T) ... L(1/T) rho_i (exact reduced chain)."""
    rho = np.asarray(rho_i, dtype=complex)
    for k in range(1, T + 1):
        rho = reduced_map(model, k / T).apply(rho)
    return rho


def resolve_final_observable(
    model: RISModel, setup: MeasurementSetup, T: int
) -> tuple[SpectralObservable, np.ndarray]:
    """The final observable and evolved state for a protocol of length T."""
    rho_f = evolved_state(model, setup.rho_i, T)
    if isinstance(setup.obs_f, str):
        if setup.obs_f != "log_rho_f":
            raise FullStatsError(f"unknown final observable {setup.obs_f!r}")
        obs_f = SpectralObservable.from_matrix(-herm_log(rho_f))
    else:
        obs_f = setup.obs_f
    return obs_f, rho_f


# ---------------------------------------------------------------------------
# per-step measurement superoperators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepOperators:
    """Forward/backward maps of one step conditioned on probe outcomes.

    forward[i][j] is the 4x4 (d^2 x d^2) matrix of
    M -> Tr_env[(Id x Pi_j) U (M x Pi_i xi Pi_i) U*], and backward[i][j] of
    N -> Tr_env[U* (N x Pi_j xi Pi_j) U (Id x Pi_i)].
    """

    y_values: np.ndarray
    y_dims: np.ndarray
    energies: np.ndarray
    beta: float
    forward: np.ndarray  # (nI, nJ, d^2, d^2)
    backward: np.ndarray


def step_operators(
    model: RISModel, s: float, Y: np.ndarray | None = None
) -> StepOperators:
    dS, dE = model.dim_sys, model.dim_env
    if Y is None:
        Y = default_counting_observable(model, s)
    obs = SpectralObservable.from_matrix(Y)
    xi = probe_state(model, s)
    U = joint_unitary(model, s)
    hE = assert_hermitian(model.h_env(s))
    n = obs.n_outcomes
    d2 = dS * dS
    fwd = np.zeros((n, n, d2, d2), dtype=complex)
    bwd = np.zeros((n, n, d2, d2), dtype=complex)
    eye = np.eye(dS)
    units = []
    for l in range(dS):
        for k in range(dS):
            E = np.zeros((dS, dS), dtype=complex)
            E[k, l] = 1.0
            units.append((k + dS * l, E))
    for i, Pi in enumerate(obs.projectors):
        xi_i = Pi @ xi @ Pi
        for j, Pj in enumerate(obs.projectors):
            IPj = tensor_product(eye, Pj)
            xi_j = Pj @ xi @ Pj
            IPi = tensor_product(eye, Pi)
            for col, E in units:
                out_f = partial_trace_env(
                    IPj @ U @ tensor_product(E, xi_i) @ U.conj().T @ IPj, dS, dE
                )
                fwd[i, j, :, col] = vec(out_f)
                out_b = partial_trace_env(
                    U.conj().T @ tensor_product(E, xi_j) @ U @ IPi, dS, dE
                )
                bwd[i, j, :, col] = vec(out_b)
    energies = np.array(
        [np.trace(hE @ P).real / np.trace(P).real for P in obs.projectors]
    )
    return StepOperators(
        y_values=obs.values,
        y_dims=obs.dims(),
        energies=energies,
        beta=float(model.beta(s)),
        forward=fwd,
        backward=bwd,
    )


def _all_steps(model: RISModel, T: int, Y=None) -> list[StepOperators]:
    return [step_operators(model, k / T, Y) for k in range(1, T + 1)]


# ---------------------------------------------------------------------------
# exact forward / backward probabilities
# ---------------------------------------------------------------------------


def _trace_from_vec(x: np.ndarray, d: int) -> float:
    return float(np.real(x[:: d + 1].sum()))


def forward_prob(
    model: RISModel,
    setup: MeasurementSetup,
    record,
    T: int,
    *,
    steps: list[StepOperators] | None = None,
    obs_f: SpectralObservable | None = None,
) -> float:
    """Probability of one full forward record (ai_idx, [(i_k, j_k)], af_idx)."""
    ai, probes, af = record
    if obs_f is None:
        obs_f, _ = resolve_final_observable(model, setup, T)
    if steps is None:
        steps = _all_steps(model, T)
    pi_i = setup.obs_i.projectors[ai]
    x = vec(pi_i @ setup.rho_i @ pi_i)
    for step, (i, j) in zip(steps, probes):
        x = step.forward[i, j] @ x
    d = model.dim_sys
    return float(np.real(np.trace(obs_f.projectors[af] @ unvec(x, d))))


def backward_prob(
    model: RISModel,
    setup: MeasurementSetup,
    record,
    T: int,
    *,
    steps: list[StepOperators] | None = None,
    obs_f: SpectralObservable | None = None,
    rho_f: np.ndarray | None = None,
) -> float:
    """Probability of one record under the time-reversed protocol."""
    ai, probes, af = record
    if obs_f is None or rho_f is None:
        obs_f, rho_f = resolve_final_observable(model, setup, T)
    if steps is None:
        steps = _all_steps(model, T)
    pi_f = obs_f.projectors[af]
    x = vec(pi_f @ rho_f @ pi_f)
    for step, (i, j) in zip(reversed(steps), reversed(probes)):
        x = step.backward[i, j] @ x
    d = model.dim_sys
    return float(np.real(np.trace(setup.obs_i.projectors[ai] @ unvec(x, d))))


@dataclass
class TrajectoryMeasure:
    """The full forward/backward measure over complete measurement records."""

    records: list
    a_i: np.ndarray
    a_f: np.ndarray
    delta_a: np.ndarray
    delta_y: np.ndarray
    p_forward: np.ndarray
    p_backward: np.ndarray
    varsigma: np.ndarray = field(init=False)

    def __post_init__(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            self.varsigma = np.log(self.p_forward) - np.log(self.p_backward)

    def entropy_production(self) -> float:
        """sigma_tot = E_forward(varsigma), the KL divergence of the measures."""
        mask = self.p_forward > 0
        return float(np.sum(self.p_forward[mask] * self.varsigma[mask]))

    def mgf(self, alpha: complex, variable: str = "delta_y") -> complex:
        x = {"delta_y": self.delta_y, "delta_a": self.delta_a}[variable]
        return complex(np.sum(self.p_forward * np.exp(alpha * x)))

    def pair_mgf(self, alpha1: complex, alpha2: complex) -> complex:
        return complex(
            np.sum(self.p_forward * np.exp(alpha1 * self.delta_y + alpha2 * self.delta_a))
        )


def enumerate_measure(
    model: RISModel, setup: MeasurementSetup, T: int, Y=None
) -> TrajectoryMeasure:
    """Exact enumeration of the trajectory measure over all records.

    Prefix-shared recursion keeps the cost linear in the number of records.
    Guarded: n_i * n_f * n_outcomes^(2T) must not exceed 10^7.
    """
    obs_f, rho_f = resolve_final_observable(model, setup, T)
    steps = _all_steps(model, T, Y)
    n_out = steps[0].y_values.size
    count = setup.obs_i.n_outcomes * obs_f.n_outcomes * n_out ** (2 * T)
    if count > ENUMERATION_GUARD:
        raise FullStatsError(
            f"enumeration would produce {count} records (guard {ENUMERATION_GUARD})"
        )
    d = model.dim_sys

    # forward pass: DFS over prefixes
    fwd_leaves: dict[tuple, np.ndarray] = {}

    def fwd(k: int, prefix: tuple, x: np.ndarray):
        if k == T:
            fwd_leaves[prefix] = x
            return
        for i in range(n_out):
            for j in range(n_out):
                fwd(k + 1, prefix + ((i, j),), steps[k].forward[i, j] @ x)

    for ai, pi in enumerate(setup.obs_i.projectors):
        fwd(0, (ai,), vec(pi @ setup.rho_i @ pi))

    # backward pass: DFS over suffixes, keyed by (probe record, af index)
    bwd_leaves: dict[tuple, np.ndarray] = {}

    def bwd(k: int, suffix: tuple, af: int, x: np.ndarray):
        if k == 0:
            bwd_leaves[(suffix, af)] = x
            return
        for i in range(n_out):
            for j in range(n_out):
                bwd(k - 1, ((i, j),) + suffix, af, steps[k - 1].backward[i, j] @ x)

    for af, pf in enumerate(obs_f.projectors):
        bwd(T, (), af, vec(pf @ rho_f @ pf))

    records, ais, afs, dys, pfs, pbs = [], [], [], [], [], []
    y_vals = [st.y_values for st in steps]
    for prefix, xf in fwd_leaves.items():
        ai, probes = prefix[0], prefix[1:]
        dy = sum(y_vals[k][j] - y_vals[k][i] for k, (i, j) in enumerate(probes))
        for af in range(obs_f.n_outcomes):
            xb = bwd_leaves[(probes, af)]
            pf = float(
                np.real(np.trace(obs_f.projectors[af] @ unvec(xf, d)))
            )
            pb = float(
                np.real(np.trace(setup.obs_i.projectors[ai] @ unvec(xb, d)))
            )
            records.append((ai, probes, af))
            ais.append(setup.obs_i.values[ai])
            afs.append(obs_f.values[af])
            dys.append(dy)
            pfs.append(max(pf, 0.0))
            pbs.append(max(pb, 0.0))
    a_i = np.asarray(ais)
    a_f = np.asarray(afs)
    return TrajectoryMeasure(
        records=records,
        a_i=a_i,
        a_f=a_f,
        delta_a=a_i - a_f,
        delta_y=np.asarray(dys),
        p_forward=np.asarray(pfs),
        p_backward=np.asarray(pbs),
    )


# ---------------------------------------------------------------------------
# trajectory-level balance identity
# ---------------------------------------------------------------------------


def _commutes_with_projectors(rho: np.ndarray, obs: SpectralObservable) -> bool:
    scale = max(np.abs(rho).max(), 1.0)
    return all(
        np.abs(P @ rho - rho @ P).max() <= 1e-10 * scale for P in obs.projectors
    )


def _probe_state_is_function_of_Y(
    model: RISModel, s: float, Y: np.ndarray | None
) -> bool:
    if Y is None:
        Y = default_counting_observable(model, s)
    obs = SpectralObservable.from_matrix(Y)
    xi = probe_state(model, s)
    for P in obs.projectors:
        dim = np.trace(P).real
        c = np.trace(P @ xi).real / dim
        if np.abs(P @ xi @ P - c * P).max() > 1e-10:
            return False
    return True


def balance_applicable(
    model: RISModel, setup: MeasurementSetup, T: int, Y=None
) -> bool:
    """Check the hypotheses under which the balance identity holds.

    (i) rho_i commutes with the initial observable, (ii) the evolved state
    commutes with the final observable, (iii) each probe state is a
    function of its counting observable.
    """
    obs_f, rho_f = resolve_final_observable(model, setup, T)
    if not _commutes_with_projectors(setup.rho_i, setup.obs_i):
        return False
    if not _commutes_with_projectors(rho_f, obs_f):
        return False
    return all(
        _probe_state_is_function_of_Y(model, k / T, Y) for k in range(1, T + 1)
    )


def balance_rhs(
    model: RISModel, setup: MeasurementSetup, record, T: int
) -> float | None:
    """Closed form of log(pF/pB) for one record, or None when not applicable.

    log[ Tr(pi_i rho_i) dim(pi_f) / (Tr(pi_f rho_f) dim(pi_i)) ]
    + sum_k beta_k (E_{j_k} - E_{i_k}), with E_i the mean probe energy on
    the i-th outcome eigenspace.
    """
    if not balance_applicable(model, setup, T):
        return None
    ai, probes, af = record
    obs_f, rho_f = resolve_final_observable(model, setup, T)
    pi_i = setup.obs_i.projectors[ai]
    pi_f = obs_f.projectors[af]
    wi = np.trace(pi_i @ setup.rho_i).real
    wf = np.trace(pi_f @ rho_f).real
    if wi <= 0 or wf <= 0:
        return None
    out = np.log(wi / wf) + np.log(
        np.trace(pi_f).real / np.trace(pi_i).real
    )
    steps = _all_steps(model, T)
    for step, (i, j) in zip(steps, probes):
        out += step.beta * (step.energies[j] - step.energies[i])
    return float(out)


# ---------------------------------------------------------------------------
# entropies and the per-step balance
# ---------------------------------------------------------------------------


def von_neumann_entropy(rho: np.ndarray) -> float:
    w, _ = hermitian_eig(rho)
    w = w[w > 1e-15]
    return float(-(w * np.log(w)).sum())


def relative_entropy(rho: np.ndarray, sigma: np.ndarray) -> float:
    """S(rho | sigma) = Tr rho (log rho - log sigma); sigma must be faithful."""
    rho = assert_hermitian(rho)
    log_sigma = herm_log(sigma)
    w, _ = hermitian_eig(rho)
    w = w[w > 1e-15]
    out = float(np.sum(w * np.log(w)))
    out -= float(np.real(np.trace(rho @ log_sigma)))
    return out


def renyi_relative_entropy(alpha: float, rho: np.ndarray, sigma: np.ndarray) -> float:
    """S_alpha(rho | sigma) = log Tr(rho^alpha sigma^(1-alpha))."""
    from .linalg import herm_power

    A = herm_power(assert_hermitian(rho), float(alpha))
    B = herm_power(assert_hermitian(sigma), 1.0 - float(alpha))
    return float(np.log(np.real(np.trace(A @ B))))


def step_balance(model: RISModel, rho: np.ndarray, s: float) -> dict:
    """Entropy/heat balance of a single interaction step at parameter s.

    Returns the system entropy change, the heat deposited in the probe,
    the step entropy production sigma = S(U(rho x xi)U* | rho' x xi) >= 0,
    and the defect of the identity sigma = dS + beta*dQ (which vanishes).
    """
    xi = probe_state(model, s)
    U = joint_unitary(model, s)
    joint = U @ tensor_product(rho, xi) @ U.conj().T
    dS_, dE_ = model.dim_sys, model.dim_env
    rho_next = partial_trace_env(joint, dS_, dE_)
    xi_next = partial_trace_sys(joint, dS_, dE_)
    hE = assert_hermitian(model.h_env(s))
    beta = float(model.beta(s))
    entropy_change = von_neumann_entropy(rho_next) - von_neumann_entropy(rho)
    heat = float(np.real(np.trace(hE @ (xi_next - xi))))
    sigma = relative_entropy(joint, tensor_product(rho_next, xi))
    return {
        "entropy_change": entropy_change,
        "heat_to_probe": heat,
        "sigma": sigma,
        "beta": beta,
        "defect": sigma - entropy_change - beta * heat,
    }


def total_entropy_production(model: RISModel, rho_i: np.ndarray, T: int) -> float:
    """sigma_tot for the entropic setup, as the sum of per-step productions.

    Along the exact reduced chain, E(varsigma) = sum_k sigma_k with sigma_k
    the relative entropy of the interacting pair to the product of its
    marginals' targets; this avoids enumerating trajectories at large T.
    """
    rho = np.asarray(rho_i, dtype=complex)
    total = 0.0
    for k in range(1, T + 1):
        bal = step_balance(model, rho, k / T)
        total += bal["sigma"]
        rho = reduced_map(model, k / T).apply(rho)
    return total


# ---------------------------------------------------------------------------
# forward sampling
# ---------------------------------------------------------------------------


@dataclass
class SampledTrajectories:
    a_i: np.ndarray
    a_f: np.ndarray
    delta_a: np.ndarray
    delta_y: np.ndarray
    varsigma: np.ndarray
    probe_records: np.ndarray  # (n, T) flat outcome-pair indices


def sample_trajectories(
    model: RISModel,
    setup: MeasurementSetup,
    T: int,
    n: int,
    seed: int,
    Y=None,
) -> SampledTrajectories:
    """Draw n independent trajectories from the exact forward measure.

    Randomness is counter-based: trajectory t consumes uniforms from its
    own stream keyed by (seed, t), so results depend only on
    (seed, n, T) and not on batching. For the entropic setup varsigma is
    filled through the identity varsigma = -delta_a + delta_y; otherwise
    it is NaN (exact log-ratios are available through enumeration).
    """
    obs_f, _ = resolve_final_observable(model, setup, T)
    steps = _all_steps(model, T, Y)
    n_out = steps[0].y_values.size
    d = model.dim_sys

    uniforms = np.empty((n, T + 2))
    for t in range(n):
        gen = np.random.Generator(np.random.Philox(key=(seed << 64) + t))
        uniforms[t] = gen.random(T + 2)

    # initial measurement
    pi_list = setup.obs_i.projectors
    q = np.array([np.trace(P @ setup.rho_i).real for P in pi_list])
    q = np.clip(q, 0.0, None)
    q = q / q.sum()
    ai_idx = (uniforms[:, 0][:, None] > np.cumsum(q)[None, :]).sum(axis=1)
    states = np.empty((n, d * d), dtype=complex)
    for a in range(len(pi_list)):
        mask = ai_idx == a
        if mask.any():
            post = pi_list[a] @ setup.rho_i @ pi_list[a]
            states[mask] = vec(post / np.trace(post).real)

    trace_idx = np.arange(0, d * d, d + 1)
    delta_y = np.zeros(n)
    probe_records = np.empty((n, T), dtype=np.int64)
    for k, step in enumerate(steps):
        mats = step.forward.reshape(n_out * n_out, d * d, d * d)
        applied = np.einsum("oab,nb->noa", mats, states)
        probs = np.real(applied[:, :, trace_idx].sum(axis=2))
        probs = np.clip(probs, 0.0, None)
        probs /= probs.sum(axis=1, keepdims=True)
        u = uniforms[:, 1 + k]
        choice = (u[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)
        choice = np.minimum(choice, n_out * n_out - 1)
        picked = applied[np.arange(n), choice]
        norm = np.real(picked[:, trace_idx].sum(axis=1))
        states = picked / norm[:, None]
        i_idx, j_idx = np.divmod(choice, n_out)
        delta_y += step.y_values[j_idx] - step.y_values[i_idx]
        probe_records[:, k] = choice

    # final measurement
    pf_mats = np.stack([vec(P.T) for P in obs_f.projectors])
    probs_f = np.real(states @ pf_mats.T)
    probs_f = np.clip(probs_f, 0.0, None)
    probs_f /= probs_f.sum(axis=1, keepdims=True)
    u = uniforms[:, T + 1]
    af_idx = (u[:, None] > np.cumsum(probs_f, axis=1)).sum(axis=1)
    af_idx = np.minimum(af_idx, obs_f.n_outcomes - 1)

    a_i = setup.obs_i.values[ai_idx]
    a_f = obs_f.values[af_idx]
    delta_a = a_i - a_f
    if setup.entropic:
        varsigma = -delta_a + delta_y
    else:
        varsigma = np.full(n, np.nan)
    return SampledTrajectories(
        a_i=a_i,
        a_f=a_f,
        delta_a=delta_a,
        delta_y=delta_y,
        varsigma=varsigma,
        probe_records=probe_records,
    )


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def write_trajectories_csv(path, sampled: SampledTrajectories) -> None:
    """Write sampled trajectories with shortest round-trip float formatting."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["trajectory_id", "a_i", "a_f", "delta_a", "delta_y", "varsigma"]
        )
        for t in range(sampled.a_i.size):
            writer.writerow(
                [
                    t,
                    repr(float(sampled.a_i[t])),
                    repr(float(sampled.a_f[t])),
                    repr(float(sampled.delta_a[t])),
                    repr(float(sampled.delta_y[t])),
                    repr(float(sampled.varsigma[t])),
                ]
            )


def write_measure_csv(path, measure: TrajectoryMeasure) -> None:
    """Write the exact enumerated measure (forward/backward probabilities)."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "trajectory_id",
                "a_i",
                "a_f",
                "delta_a",
                "delta_y",
                "varsigma",
                "p_forward",
                "p_backward",
            ]
        )
        for t in range(measure.a_i.size):
            writer.writerow(
                [
                    t,
                    repr(float(measure.a_i[t])),
                    repr(float(measure.a_f[t])),
                    repr(float(measure.delta_a[t])),
                    repr(float(measure.delta_y[t])),
                    repr(float(measure.varsigma[t])),
                    repr(float(measure.p_forward[t])),
                    repr(float(measure.p_backward[t])),
                ]
            )
