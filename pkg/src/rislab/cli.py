"""Command line interface: ``rislab <task> --config <path> [--seed N] [--out DIR]``.

Tasks:

* ``spectrum``  peripheral data of the reduced map along the protocol;
* ``lambda``    the limiting cumulant functional on an alpha grid;
* ``ldp``       the rate function on the reachable x window;
* ``simulate``  forward sampling and CLT histograms for each T;
* ``adiabatic`` residuals of the adiabatic product approximation;
* ``balance``   exact enumeration with the trajectory balance report;
* ``x0``        finite-T versus closed-form limits for the exactly
                stationary exchange preset.

Every run writes a ``manifest.json`` with the config hash, the seed, and
the defaults that were filled in; reruns with the same inputs are
byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import os

import numpy as np

from . import adiabatic, fullstats, mgfldp, model, spectral
from .config import RunConfig, load_config, write_manifest

TASKS = ("spectrum", "lambda", "ldp", "simulate", "adiabatic", "balance", "x0")


def _writer(path):
    fh = open(path, "w", newline="\n")
    return fh, csv.writer(fh, lineterminator="\n")


def _f(x: float) -> str:
    return repr(float(x))


def _initial_state(cfg: RunConfig) -> np.ndarray:
    if cfg.rho_i is not None:
        return cfg.rho_i
    return model.gibbs_state(cfg.model.h_sys, cfg.model.beta(0.0))


def task_spectrum(cfg: RunConfig, out: str) -> None:
    s_grid = np.linspace(0.0, 1.0, cfg.s_nodes)
    fh, w = _writer(os.path.join(out, "spectrum.csv"))
    with fh:
        w.writerow(["s", "beta", "spectral_radius", "period", "rho_00", "rho_11"])
        for s in s_grid:
            dec = spectral.peripheral_decomposition(model.reduced_map(cfg.model, float(s)))
            w.writerow(
                [
                    _f(s),
                    _f(cfg.model.beta(float(s))),
                    _f(dec.spectral_radius),
                    dec.period,
                    _f(dec.rho[0, 0].real),
                    _f(dec.rho[1, 1].real) if dec.rho.shape[0] > 1 else _f(0.0),
                ]
            )
    fh2, w2 = _writer(os.path.join(out, "beta_curves.csv"))
    with fh2:
        w2.writerow(["s", "beta"])
        for s in s_grid:
            w2.writerow([_f(s), _f(cfg.model.beta(float(s)))])


def task_lambda(cfg: RunConfig, out: str) -> None:
    ev = mgfldp.LambdaEvaluator(cfg.model, cfg.s_nodes)
    lo, hi, n = cfg.alpha_grid
    fh, w = _writer(os.path.join(out, "lambda.csv"))
    with fh:
        w.writerow(["alpha", "Lambda"])
        for a in np.linspace(lo, hi, n):
            w.writerow([_f(a), _f(ev(float(a)))])
    d1, d2 = mgfldp.lambda_derivatives_at_zero(cfg.model, cfg.s_nodes)
    fh2, w2 = _writer(os.path.join(out, "lambda_derivatives.csv"))
    with fh2:
        w2.writerow(["d1_at_0", "d2_at_0"])
        w2.writerow([_f(d1), _f(d2)])


def task_ldp(cfg: RunConfig, out: str) -> None:
    ev = mgfldp.LambdaEvaluator(cfg.model, cfg.s_nodes)
    window = ev.support_window()
    fh, w = _writer(os.path.join(out, "lambda_star.csv"))
    with fh:
        w.writerow(["x", "Lambda_star"])
        for a in np.linspace(-2.0, 1.0, 31):
            x = ev.derivative(float(a))
            w.writerow([_f(x), _f(mgfldp.legendre_transform(ev, x, window=window))])


def task_simulate(cfg: RunConfig, out: str) -> None:
    setup = fullstats.entropic_setup(_initial_state(cfg))
    d1, d2 = mgfldp.lambda_derivatives_at_zero(cfg.model, cfg.s_nodes)
    for T in cfg.T_list:
        samp = fullstats.sample_trajectories(
            cfg.model, setup, T, cfg.n, seed=cfg.seed
        )
        if cfg.write_csv:
            fullstats.write_trajectories_csv(
                os.path.join(out, f"trajectories_T{T}.csv"), samp
            )
        standardized = (samp.delta_y - T * d1) / np.sqrt(T)
        sd = np.sqrt(d2)
        edges = np.linspace(-4 * sd, 4 * sd, 42)
        counts, edges = np.histogram(standardized, bins=edges)
        fh, w = _writer(os.path.join(out, f"clt_hist_T{T}.csv"))
        with fh:
            w.writerow(["bin_left", "bin_right", "count", "density"])
            widths = np.diff(edges)
            for i, c in enumerate(counts):
                w.writerow(
                    [
                        _f(edges[i]),
                        _f(edges[i + 1]),
                        int(c),
                        _f(c / (cfg.n * widths[i])),
                    ]
                )


def task_adiabatic(cfg: RunConfig, out: str) -> None:
    fam = adiabatic.AdiabaticFamily(cfg.model, cfg.alpha)
    rho_i = _initial_state(cfg)
    fh, w = _writer(os.path.join(out, "adiabatic.csv"))
    with fh:
        w.writerow(["T", "alpha", "residual"])
        for T in cfg.T_list:
            exact = adiabatic.exact_deformed_chain(fam, rho_i, T)
            approx = adiabatic.deformed_adiabatic_state(fam, rho_i, T)
            from .linalg import trace_norm

            w.writerow([T, _f(cfg.alpha), _f(trace_norm(exact - approx))])


def task_balance(cfg: RunConfig, out: str) -> None:
    setup = fullstats.entropic_setup(_initial_state(cfg))
    meas = fullstats.enumerate_measure(cfg.model, setup, cfg.T)
    if cfg.write_csv:
        fullstats.write_measure_csv(os.path.join(out, "measure.csv"), meas)
    applicable = fullstats.balance_applicable(cfg.model, setup, cfg.T)
    fh, w = _writer(os.path.join(out, "balance.csv"))
    with fh:
        w.writerow(["applicable", "sigma_tot", "max_balance_defect"])
        worst = float("nan")
        if applicable:
            worst = 0.0
            for rec, pf, pb in zip(meas.records, meas.p_forward, meas.p_backward):
                if pf <= 0:
                    continue
                rhs = fullstats.balance_rhs(cfg.model, setup, rec, cfg.T)
                worst = max(worst, abs(float(np.log(pf / pb)) - rhs))
        w.writerow(
            [str(applicable), _f(meas.entropy_production()), _f(worst)]
        )


def task_x0(cfg: RunConfig, out: str) -> None:
    m = cfg.model
    rho_i = _initial_state(cfg)
    setup = fullstats.entropic_setup(rho_i)
    rho0 = spectral.invariant_state(model.reduced_map(m, 0.0))
    rho1 = spectral.invariant_state(model.reduced_map(m, 1.0))
    grid = [(-0.5, -0.5), (-0.5, 0.5), (0.0, 0.3), (0.5, -0.5), (0.5, 0.5)]
    fh, w = _writer(os.path.join(out, "x0.csv"))
    with fh:
        w.writerow(["T", "alpha1", "alpha2", "finite_T", "limit", "abs_error"])
        for T in cfg.T_list:
            for a1, a2 in grid:
                fin = mgfldp.mgf_pair(m, setup, T, a1, a2).real
                lim = mgfldp.stationary_pair_mgf_limit(rho0, rho1, rho_i, a1, a2).real
                w.writerow([T, _f(a1), _f(a2), _f(fin), _f(lim), _f(abs(fin - lim))])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rislab",
        description="numerical laboratory for adiabatic repeated interaction systems",
    )
    parser.add_argument("task", choices=TASKS)
    parser.add_argument("--config", required=True, help="path to the JSON run config")
    parser.add_argument("--seed", type=int, default=None, help="override numeric.seed")
    parser.add_argument("--out", default=None, help="override output.directory")
    args = parser.parse_args(argv)

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    os.makedirs(cfg.out_dir, exist_ok=True)

    dispatch = {
        "spectrum": task_spectrum,
        "lambda": task_lambda,
        "ldp": task_ldp,
        "simulate": task_simulate,
        "adiabatic": task_adiabatic,
        "balance": task_balance,
        "x0": task_x0,
    }
    dispatch[args.task](cfg, cfg.out_dir)
    write_manifest(os.path.join(cfg.out_dir, "manifest.json"), cfg, args.task)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
