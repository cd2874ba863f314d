"""Brute-force oracle: average unitary evolutions over sampled clock noise.

Each path p evolves unitarily to the ideal time t + delta_p(t); the ensemble
average is compared with the master equation (Markov limit) and with the
exact finite-time Gaussian dephasing law.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import textio
from .clock_models import (ClockParams, CorrelationModel, GRID_RESOLUTION, delta_variance,
                           grid_size, sample_ou_path)
from .errors import ParameterError
from .master_equation import STEP_FACTOR
from .quantum_core import DensityMatrix, Hamiltonian

CHUNK = 256
Z_LIMIT = 4.0
Z_FRACTION = 0.95
# max relative gap between Markov and exact Gaussian coherence for a good clock
MARKOV_BOUND = 1e-3
BREAKDOWN_FACTOR = 5.0


@dataclass(frozen=True, eq=False)
class EnsembleSpec:
    clock: ClockParams
    H: Hamiltonian
    rho0: DensityMatrix
    n_paths: int
    horizon: float
    dt: float
    seed: int
    record_every: int = 1

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ParameterError(f"n_paths must be a positive integer, got {self.n_paths}")
        if self.H.dim != self.rho0.dim:
            raise ParameterError("dimension mismatch between H and rho0")
        if self.clock.model is not CorrelationModel.ORNSTEIN_UHLENBECK:
            raise ParameterError("ensembles are sampled from the Ornstein-Uhlenbeck model only")
        if not (self.dt > 0) or self.dt > self.clock.theta / GRID_RESOLUTION * (1 + 1e-12):
            raise ParameterError(f"dt must be in (0, theta/{GRID_RESOLUTION}], got {self.dt}")
        wmax = self.H.max_gap
        if wmax > 0 and self.dt > STEP_FACTOR / wmax * (1 + 1e-12):
            raise ParameterError(f"dt must resolve the fastest phase: dt <= {STEP_FACTOR / wmax}")
        if not (self.horizon >= self.dt):
            raise ParameterError("horizon must be at least dt")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ParameterError("record_every must be a positive integer")
        if self.seed < 0:
            raise ParameterError("seed must be non-negative")

    def snapshot_indices(self) -> np.ndarray:
        n = grid_size(self.horizon, self.dt)
        idx = np.arange(0, n, self.record_every)
        if idx[-1] != n - 1:
            idx = np.append(idx, n - 1)
        return idx


@dataclass
class EnsembleResult:
    times: np.ndarray
    mean: np.ndarray  # (S, d, d) original basis
    stderr: np.ndarray  # (S, d, d) real, complex-sample standard error
    mean_eig: np.ndarray  # (S, d, d) energy eigenbasis
    stderr_eig: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def states(self) -> list[DensityMatrix]:
        return [DensityMatrix(m, check=False) for m in self.mean]


class _Kahan:
    """Compensated running sum of equally shaped arrays."""

    def __init__(self, shape, dtype):
        self.total = np.zeros(shape, dtype=dtype)
        self.comp = np.zeros(shape, dtype=dtype)

    def add(self, x):
        y = x - self.comp
        t = self.total + y
        self.comp = (t - self.total) - y
        self.total = t


def _chunk_sums(spec: EnsembleSpec, start: int, stop: int, snaps: np.ndarray,
                times: np.ndarray, rho_e0: np.ndarray, base: np.ndarray):
    H = spec.H
    u = H.eigenvectors
    gaps = H.gaps
    deltas = np.empty((stop - start, snaps.size))
    violations = 0
    for k, p in enumerate(range(start, stop)):
        path = sample_ou_path(spec.clock, spec.horizon, spec.dt, spec.seed, p)
        deltas[k] = path.delta[snaps]
        violations += path.causality_violations
    # per-path eigenbasis state at ideal time t + delta
    s = times[None, :] + deltas
    x_eig = rho_e0[None, None] * np.exp(-1j * gaps[None, None] * s[:, :, None, None])
    x_orig = np.einsum("ij,psjk,lk->psil", u, x_eig, u.conj(), optimize=True)
    x_orig = 0.5 * (x_orig + np.conj(np.swapaxes(x_orig, -1, -2)))
    y_eig = x_eig - base[0][None]
    y_orig = x_orig - base[1][None]
    return (y_eig.sum(axis=0), (np.abs(y_eig) ** 2).sum(axis=0),
            y_orig.sum(axis=0), (np.abs(y_orig) ** 2).sum(axis=0), violations)


def ensemble_average(spec: EnsembleSpec, threads: int = 1) -> EnsembleResult:
    """Average of unitary evolutions over ``n_paths`` sampled clock paths.

    Paths are processed in fixed chunks of 256; chunk sums are reduced in
    chunk order with compensated summation, so the result does not depend
    on ``threads``. Samples are centered on the ideal-clock trajectory before
    summing to limit cancellation in the variance.
    """
    if int(threads) != threads or threads < 1:
        raise ParameterError("threads must be a positive integer")
    H = spec.H
    snaps = spec.snapshot_indices()
    times = snaps * spec.dt
    rho_e0 = H.to_eigenbasis(spec.rho0.matrix)
    rho_e0 = 0.5 * (rho_e0 + rho_e0.conj().T)
    ideal_eig = rho_e0[None] * np.exp(-1j * H.gaps[None] * times[:, None, None])
    u = H.eigenvectors
    ideal_orig = np.einsum("ij,sjk,lk->sil", u, ideal_eig, u.conj())
    ideal_orig = 0.5 * (ideal_orig + np.conj(np.swapaxes(ideal_orig, -1, -2)))

    bounds = [(a, min(a + CHUNK, spec.n_paths)) for a in range(0, spec.n_paths, CHUNK)]

    def work(b):
        return _chunk_sums(spec, b[0], b[1], snaps, times, rho_e0, (ideal_eig, ideal_orig))

    if threads == 1 or len(bounds) == 1:
        results = map(work, bounds)
    else:
        pool = ThreadPoolExecutor(max_workers=threads)
        results = pool.map(work, bounds)
    shape = ideal_eig.shape
    acc = [_Kahan(shape, complex), _Kahan(shape, float), _Kahan(shape, complex), _Kahan(shape, float)]
    violations = 0
    try:
        for res in results:
            for a, r in zip(acc, res[:4]):
                a.add(r)
            violations += res[4]
    finally:
        if threads > 1 and len(bounds) > 1:
            pool.shutdown()

    n = spec.n_paths

    def finish(s1, s2, base):
        mean_dev = s1 / n
        if n > 1:
            var = np.maximum(s2 - n * np.abs(mean_dev) ** 2, 0.0) / (n - 1)
            err = np.sqrt(var / n)
        else:
            err = np.zeros(shape)
        return base + mean_dev, err

    mean_eig, err_eig = finish(acc[0].total, acc[1].total, ideal_eig)
    mean_orig, err_orig = finish(acc[2].total, acc[3].total, ideal_orig)
    mean_orig = 0.5 * (mean_orig + np.conj(np.swapaxes(mean_orig, -1, -2)))
    meta = {
        "n_paths": n,
        "n_snapshots": int(times.size),
        "causality_violations": int(violations),
        "chunk": CHUNK,
    }
    return EnsembleResult(times, mean_orig, err_orig, mean_eig, err_eig, meta)


def gaussian_dephasing_factor(clock: ClockParams, omega_nm: float, t):
    """exp(-i w t) exp(-w**2 Var[delta(t)] / 2) for stationary Gaussian clock noise.

    Var[delta] is closed form for OU; other models integrate the tabulated
    correlation numerically.
    """
    var = delta_variance(clock, t)
    return np.exp(-1j * omega_nm * np.asarray(t, dtype=float)) * np.exp(-0.5 * omega_nm ** 2 * var)


def delta_variance_dblquad(clock: ClockParams, t: float) -> float:
    """Var[delta(t)] by direct 2-D quadrature of c(|t1 - t2|); independent oracle."""
    from .clock_models import correlation
    if t == 0:
        return 0.0
    # split along the diagonal where |t1 - t2| has its kink
    lower, _ = integrate.dblquad(lambda t2, t1: correlation(clock, t1 - t2), 0.0, t,
                                 lambda t1: 0.0, lambda t1: t1, epsabs=0.0, epsrel=1e-12)
    return 2.0 * lower


@dataclass
class CompareReport:
    times: np.ndarray
    pairs: list[tuple[int, int]]
    mc_abs: np.ndarray  # (S, P)
    stderr: np.ndarray
    gauss_abs: np.ndarray
    markov_abs: np.ndarray
    zscores: np.ndarray
    summary: dict

    def write_csv(self, path, pair: tuple[int, int] = (0, 1)):
        k = self.pairs.index(pair)
        rows = zip(self.times, self.mc_abs[:, k], self.stderr[:, k],
                   self.gauss_abs[:, k], self.markov_abs[:, k])
        return textio.write_csv(
            path, ["t", "abs_rho01_mc", "stderr", "abs_rho01_exact_gauss", "abs_rho01_markov"],
            rows, comments=self.summary)


def compare_to_master(spec: EnsembleSpec, threads: int = 1) -> CompareReport:
    """Run Monte Carlo, the exact Markov solution and the exact Gaussian law on one grid.

    Comparisons use eigenbasis coherences rho_nm, n < m. z-scores are
    ||rho_nm|_mc - |rho_nm|_gauss| / stderr; points with zero standard error
    count as z = 0 when the deviation is below 1e-12, else infinity.
    """
    ens = ensemble_average(spec, threads=threads)
    H = spec.H
    d = H.dim
    times = ens.times
    rho_e0 = H.to_eigenbasis(spec.rho0.matrix)
    gaps = H.gaps
    D = spec.clock.diffusion
    var = delta_variance(spec.clock, times)
    gauss = rho_e0[None] * np.exp(-1j * gaps[None] * times[:, None, None]
                                  - 0.5 * gaps[None] ** 2 * var[:, None, None])
    markov = rho_e0[None] * np.exp(-1j * gaps[None] * times[:, None, None]
                                   - D * gaps[None] ** 2 * times[:, None, None])
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    ii = [p[0] for p in pairs]
    jj = [p[1] for p in pairs]
    mc_abs = np.abs(ens.mean_eig[:, ii, jj]) if pairs else np.zeros((times.size, 0))
    err = ens.stderr_eig[:, ii, jj] if pairs else np.zeros((times.size, 0))
    g_abs = np.abs(gauss[:, ii, jj]) if pairs else np.zeros((times.size, 0))
    m_abs = np.abs(markov[:, ii, jj]) if pairs else np.zeros((times.size, 0))
    dev = np.abs(mc_abs - g_abs)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(err > 0, dev / np.where(err > 0, err, 1.0),
                     np.where(dev <= 1e-12, 0.0, np.inf))

    ref = np.abs(rho_e0[ii, jj]) if pairs else np.zeros(0)
    live = ref > 1e-14
    if np.any(live):
        discrepancy = float(np.max(np.abs(m_abs[:, live] - g_abs[:, live]) / ref[live]))
    else:
        discrepancy = 0.0
    if z.size:
        per_point = np.all(z < Z_LIMIT, axis=1)
        z_fraction = float(np.mean(per_point))
        z_max = float(np.max(z))
    else:
        z_fraction, z_max = 1.0, 0.0
    wmax = H.max_gap
    markov_param = spec.clock.theta * wmax
    summary = {
        "n_paths": spec.n_paths,
        "seed": spec.seed,
        "theta": spec.clock.theta,
        "kappa": spec.clock.kappa,
        "diffusion": D,
        "theta_times_max_gap": markov_param,
        "causality_violations": ens.metadata["causality_violations"],
        "max_dev_mc_vs_gauss": float(np.max(np.abs(ens.mean_eig - gauss))),
        "max_dev_mc_vs_markov": float(np.max(np.abs(ens.mean_eig - markov))),
        "max_dev_gauss_vs_markov": float(np.max(np.abs(gauss - markov))),
        "max_population_drift": float(np.max(np.abs(
            np.diagonal(ens.mean_eig, axis1=1, axis2=2) - np.diag(rho_e0)[None]))),
        "max_zscore": z_max,
        "fraction_points_z_below_4": z_fraction,
        "zscore_pass": z_fraction >= Z_FRACTION,
        "markov_discrepancy": discrepancy,
        "markov_discrepancy_bound": MARKOV_BOUND,
        "markov_ok": discrepancy <= MARKOV_BOUND,
        "markov_breakdown": discrepancy > BREAKDOWN_FACTOR * MARKOV_BOUND,
        "markov_condition_violated": markov_param > 1.0,
    }
    return CompareReport(times, pairs, mc_abs, err, g_abs, m_abs, z, summary)
