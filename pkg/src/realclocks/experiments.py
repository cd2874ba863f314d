"""The five batch experiments behind the CLI.

Each runner writes its CSV artifacts into ``cfg.output_dir`` and returns a
pair ``(results, checks)`` of key-value dicts; ``checks`` maps check names to
booleans.
"""
from __future__ import annotations

import math

import numpy as np

from . import classical_dynamics as cd
from . import clock_models as cm
from . import effective_bath as eb
from . import master_equation as me
from . import monte_carlo as mc
from . import textio
from .config import ExperimentConfig
from .errors import IntegrityError

STATS_RTOL = 0.10


def _record_every(n_steps: int, n_snapshots: int) -> int:
    return max(1, int(round(n_steps / max(1, n_snapshots))))


def run_clock_stats(cfg: ExperimentConfig, threads: int = 1):
    c, n = cfg.clock, cfg.numeric
    out = cfg.output_dir
    paths = [cm.sample_ou_path(c, n["horizon"], n["dt"], n["seed"], p) for p in range(n["n_paths"])]
    paths[0].write_csv(out / "clock_path.csv")
    stats = cm.estimate_stats(paths)
    stats.write_report(out / "clock_stats.txt")
    lags = np.arange(stats.c_hat.size)
    textio.write_csv(out / "correlation.csv", ["lag", "tau", "c_hat", "c_model"],
                     zip(lags, lags * stats.spacing, stats.c_hat,
                         cm.correlation(c, lags * stats.spacing)))
    res = {f"stats_{k}": v for k, v in stats.as_dict().items()}
    res["expected_variance_slope"] = 2.0 * c.kappa ** 2 / c.theta
    checks = {}
    if c.kappa == 0:
        checks["ideal_clock_zero_stats"] = (stats.mean_alpha == 0 and stats.c_hat[0] == 0
                                            and stats.theta_hat is None
                                            and (stats.variance_slope or 0.0) == 0.0)
    else:
        def close(est, ref):
            return est is not None and abs(est - ref) <= STATS_RTOL * ref
        checks["theta_recovered_10pct"] = close(stats.theta_hat, c.theta)
        checks["kappa_recovered_10pct"] = close(stats.kappa_hat, c.kappa)
        checks["variance_slope_10pct"] = close(stats.variance_slope, 2.0 * c.kappa ** 2 / c.theta)
    return res, checks


def run_dephasing_compare(cfg: ExperimentConfig, threads: int = 1):
    n = cfg.numeric
    n_steps = cm.grid_size(n["horizon"], n["dt"]) - 1
    spec = mc.EnsembleSpec(cfg.clock, cfg.H, cfg.rho0, n["n_paths"], n["horizon"], n["dt"],
                           n["seed"], record_every=_record_every(n_steps, n["n_snapshots"]))
    report = mc.compare_to_master(spec, threads=threads)
    if report.pairs:
        report.write_csv(cfg.output_dir / "dephasing_report.csv")
    s = report.summary
    res = {k: v for k, v in s.items() if k not in ("theta", "kappa", "seed", "n_paths")}
    checks = {
        "zscore_95pct_below_4": bool(s["zscore_pass"]),
        "populations_constant": s["max_population_drift"] < 1e-12,
    }
    if cfg.clock.kappa == 0:
        checks["ideal_clock_curves_identical"] = max(
            s["max_dev_mc_vs_gauss"], s["max_dev_mc_vs_markov"], s["max_dev_gauss_vs_markov"]) < 1e-10
    return res, checks


def run_master_trajectory(cfg: ExperimentConfig, threads: int = 1):
    n = cfg.numeric
    params = me.MasterParams(cfg.H, cfg.clock.diffusion, n["dt"])
    n_steps = int(math.ceil(n["horizon"] / n["dt"]))
    every = n.get("record_every") or _record_every(n_steps, n["n_snapshots"])
    traj = me.integrate(params, cfg.rho0, n["horizon"], record_every=every)
    traj.write_csv(cfg.output_dir / "trajectory.csv")
    textio.write_csv(cfg.output_dir / "decay_constants.csv", ["n", "m", "rate"],
                     me.decay_constants(params))
    exact = me.exact_trajectory(params, cfg.rho0, traj.times)
    dev = me.max_deviation(traj, exact)
    rho_e0 = cfg.H.to_eigenbasis(cfg.rho0.matrix)
    pops = np.array([np.real(np.diag(cfg.H.to_eigenbasis(s.matrix))) for s in traj.states])
    pop_drift = float(np.max(np.abs(pops - np.real(np.diag(rho_e0))[None])))
    rate = me.min_rate(params)
    res = {
        "steps": traj.metadata["steps"],
        "snapshots": len(traj),
        "min_rate": rate,
        "max_dev_vs_exact": dev,
        "entropy_initial": float(traj.entropies[0]),
        "entropy_final": float(traj.entropies[-1]),
        "min_eigenvalue": traj.metadata["min_eigenvalue"],
        "max_trace_error": traj.metadata["max_trace_error"],
        "max_population_drift": pop_drift,
        "beyond_applicability": traj.metadata["beyond_applicability"],
    }
    checks = {
        "matches_exact_1e-8": dev < 1e-8,
        "entropy_nondecreasing": me.entropy_nondecreasing(traj),
        "positivity_1e-8": traj.metadata["min_eigenvalue"] >= -1e-8,
        "trace_1e-10": traj.metadata["max_trace_error"] < 1e-10,
        "populations_constant_1e-10": pop_drift < 1e-10,
    }
    return res, checks


def run_classical_diffusion(cfg: ExperimentConfig, threads: int = 1):
    n, cl = cfg.numeric, cfg.classical
    omega, D = cl["omega"], cfg.clock.diffusion
    n_grid, T = n["n_grid"], n["horizon"]
    M = n_grid // 2 - 1
    init = cl["initial"]
    out = cfg.output_dir
    times = np.linspace(0.0, T, n["n_snapshots"] + 1)
    res = {"omega": omega, "diffusion": D, "mode_decay_expected": omega ** 2 * D}
    checks = {}

    if init["kind"] == "delta":
        modes0 = cd.delta_release(init.get("phi0", 0.0), init.get("n_modes", M))
    else:
        modes0 = cd.FourierModes.von_mises(init.get("mu", math.pi), init.get("concentration", 1.0), M)
    spectral = [cd.evolve_modes(modes0, omega, D, t) for t in times]
    final_modes = spectral[-1]
    final_modes.write_csv(out / "modes.csv")
    res["angular_variance_final"] = final_modes.angular_variance()
    if T > 0 and D > 0:
        rate = cd.fit_mode_decay(times, [m.mode(1) for m in spectral])
        res["mode1_decay_spectral"] = rate
        checks["mode1_decay_spectral_1pct"] = abs(rate - omega ** 2 * D) <= 0.01 * omega ** 2 * D
    try:
        final_spec = final_modes.to_distribution(n_grid, omega, D)
        final_spec.write_csv(out / "density_spectral.csv")
        res["distance_to_uniform"] = float(np.max(np.abs(final_spec.values - 1.0 / cd.TWO_PI)))
        if D > 0 and T >= 20.0 / (omega ** 2 * D):
            checks["uniform_limit_1e-6"] = res["distance_to_uniform"] < 1e-6
    except IntegrityError as exc:  # truncated delta not yet smooth at T
        res["density_spectral"] = f"not sampled: {exc}"

    if init["kind"] == "von_mises":
        dist0 = cd.AngleDistribution.von_mises(n_grid, init.get("mu", math.pi),
                                               init.get("concentration", 1.0), omega, D)
        grid_states = [dist0]
        for t0, t1 in zip(times[:-1], times[1:]):
            grid_states.append(cd.evolve_grid(grid_states[-1], t1 - t0, n["dt"]))
        grid_states[-1].write_csv(out / "density_grid.csv")
        worst = max(float(np.max(np.abs(g.values - m.to_distribution(n_grid).values)))
                    for g, m in zip(grid_states, spectral))
        drift = max(abs(g.total() - 1.0) for g in grid_states)
        res["max_grid_vs_spectral"] = worst
        res["max_probability_drift"] = drift
        checks["grid_vs_spectral_1e-3"] = worst < 1e-3
        checks["probability_conserved_1e-10"] = drift < 1e-10
        if T > 0 and D > 0:
            g_rate = cd.fit_mode_decay(times, [cd.FourierModes.from_grid(g).mode(1) for g in grid_states])
            res["mode1_decay_grid"] = g_rate
            checks["mode1_decay_grid_5pct"] = abs(g_rate - omega ** 2 * D) <= 0.05 * omega ** 2 * D
    else:
        res["grid_solver"] = "skipped for delta release"
    return res, checks


def run_bath_spectrum(cfg: ExperimentConfig, threads: int = 1):
    n, c = cfg.numeric, cfg.clock
    out = cfg.output_dir
    if c.model is cm.CorrelationModel.ORNSTEIN_UHLENBECK:
        rep = eb.bath_consistency_check(c, omega_max=n["omega_max"], n_omega=n["n_omega"])
        omega, S = rep["omega"], rep["S"]
        res = {k: v for k, v in rep.items() if np.ndim(v) == 0 and k != "pass"}
        checks = {"S0_equals_D_and_lorentzian": bool(rep["pass"])}
    else:
        omega = np.linspace(0.0, n.get("omega_max", 50.0 / c.theta), n["n_omega"])
        S = eb.spectral_density(c, omega)
        res = {"S0": float(S[0])}
        checks = {"nonnegative": bool(np.all(S >= -1e-12))}
    eb.write_spectrum_csv(out / "bath_spectrum.csv", omega, S)
    bath = eb.BathModel.from_clock(c, n["temperature_product"], omega)
    textio.write_csv(out / "bath_chi_squared.csv", ["omega", "chi_squared"],
                     zip(bath.omega, bath.chi_squared))
    res["temperature_product"] = n["temperature_product"]
    return res, checks


RUNNERS = {
    "clock_stats": run_clock_stats,
    "dephasing_compare": run_dephasing_compare,
    "master_trajectory": run_master_trajectory,
    "classical_diffusion": run_classical_diffusion,
    "bath_spectrum": run_bath_spectrum,
}
