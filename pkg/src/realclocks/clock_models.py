"""Good-clock error processes: sampling and empirical statistics.

A real clock reads ``t`` when the ideal time is ``s = t + delta(t)``. The
relative error ``alpha = d(delta)/dt`` is a stationary zero-mean process; the
generic Gaussian-Markov choice is Ornstein-Uhlenbeck with correlation
``c(tau) = (kappa/theta)**2 * exp(-|tau|/theta)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, signal

from . import textio
from .errors import ParameterError, RangeError

GOOD_CLOCK_RATIO = 0.1
GRID_RESOLUTION = 20  # samples per correlation time, at least
WINDOW_FACTOR = 6.0  # correlation-sum window, in units of the running theta_hat


class CorrelationModel(enum.Enum):
    ORNSTEIN_UHLENBECK = "ornstein_uhlenbeck"
    TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class ClockParams:
    """Statistical fingerprint of a good clock.

    ``epsilon`` is the tick spacing of a discrete clock, ``theta`` the
    correlation time and ``kappa`` the noise amplitude (kappa**2 = c0 theta**2).
    ``kappa == 0`` is the ideal clock and is allowed.
    """

    theta: float
    kappa: float
    epsilon: float = 1.0
    model: CorrelationModel = CorrelationModel.ORNSTEIN_UHLENBECK
    table_tau: np.ndarray | None = field(default=None, repr=False)
    table_c: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not (self.theta > 0 and math.isfinite(self.theta)):
            raise ParameterError(f"theta must be positive, got {self.theta}")
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise ParameterError(f"kappa must be non-negative, got {self.kappa}")
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if self.model is CorrelationModel.TABULATED:
            if self.table_tau is None or self.table_c is None:
                raise ParameterError("tabulated model needs table_tau and table_c")
            tau = np.array(self.table_tau, dtype=float)
            c = np.array(self.table_c, dtype=float)
            if tau.ndim != 1 or tau.shape != c.shape or tau.size < 2:
                raise ParameterError("correlation table must be two equal 1-D arrays, length >= 2")
            if tau[0] != 0.0 or np.any(np.diff(tau) <= 0):
                raise ParameterError("table_tau must start at 0 and increase strictly")
            tau.setflags(write=False)
            c.setflags(write=False)
            object.__setattr__(self, "table_tau", tau)
            object.__setattr__(self, "table_c", c)

    @classmethod
    def tabulated(cls, tau, c, epsilon: float = 1.0) -> "ClockParams":
        """Build a clock from a tabulated correlation c(tau), tau >= 0.

        theta and kappa are derived from the table: theta = int_0^inf c / c0
        and kappa = theta * sqrt(c0).
        """
        tau = np.asarray(tau, dtype=float)
        c = np.asarray(c, dtype=float)
        if tau.ndim != 1 or tau.shape != c.shape or tau.size < 2:
            raise ParameterError("correlation table must be two equal 1-D arrays, length >= 2")
        if c[0] <= 0:
            raise ParameterError("c(0) must be positive")
        theta = float(integrate.trapezoid(c, tau) / c[0])
        return cls(theta=theta, kappa=theta * math.sqrt(c[0]), epsilon=epsilon,
                   model=CorrelationModel.TABULATED, table_tau=tau, table_c=c)

    @property
    def c0(self) -> float:
        if self.model is CorrelationModel.TABULATED:
            return float(self.table_c[0])
        return (self.kappa / self.theta) ** 2

    @property
    def ratio(self) -> float:
        return self.kappa / self.theta

    @property
    def good_clock(self) -> bool:
        return self.ratio < GOOD_CLOCK_RATIO

    @property
    def diffusion(self) -> float:
        """D = kappa**2 / theta, the master-equation diffusion constant."""
        return self.kappa ** 2 / self.theta

    @property
    def tau_max(self) -> float:
        if self.model is CorrelationModel.TABULATED:
            return float(self.table_tau[-1])
        return math.inf


@dataclass(frozen=True, eq=False)
class NoisePath:
    """One realization of alpha(t) on a uniform grid, with its cumulative error."""

    grid_dt: float
    alpha: np.ndarray
    delta: np.ndarray
    causality_violations: int
    seed: tuple[int, int]

    @property
    def times(self) -> np.ndarray:
        return self.grid_dt * np.arange(self.alpha.size)

    @property
    def spacing(self) -> float:
        return self.grid_dt

    def write_csv(self, path):
        return textio.write_csv(path, ["t", "alpha", "delta"],
                                zip(self.times, self.alpha, self.delta))

    @classmethod
    def read_csv(cls, path) -> "NoisePath":
        header, data, _ = textio.read_csv(path)
        if header != ["t", "alpha", "delta"]:
            raise ParameterError(f"{path}: unexpected header {header}")
        t, alpha, delta = data.T
        dt = float(t[1] - t[0]) if t.size > 1 else 0.0
        return cls(dt, _ro(alpha), _ro(delta), int(np.count_nonzero(alpha <= -1.0)), (-1, -1))


@dataclass(frozen=True, eq=False)
class TickSequence:
    """Readings s_k = k*epsilon + delta_k of a discrete clock, k = 0..n_ticks."""

    epsilon: float
    ticks: np.ndarray
    alpha: np.ndarray
    delta: np.ndarray
    causality_violations: int
    seed: tuple[int, int]

    @property
    def spacing(self) -> float:
        return self.epsilon

    @property
    def times(self) -> np.ndarray:
        return self.epsilon * np.arange(self.delta.size)


def _ro(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def path_rng(seed: int, path_index: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, path_index).

    Philox streams for different keys are independent, so ensembles are
    reproducible no matter in which order or on which thread paths are drawn.
    """
    if seed < 0 or path_index < 0:
        raise ParameterError("seed and path_index must be non-negative")
    key = ((int(seed) & (2**64 - 1)) << 64) | (int(path_index) & (2**64 - 1))
    return np.random.Generator(np.random.Philox(key=key))


def ou_series(n: int, step: float, theta: float, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Stationary OU samples at spacing ``step`` by the exact AR(1) update.

    ``alpha[0] ~ N(0, sigma**2)``; ``alpha[i+1] = a alpha[i] + sigma sqrt(1-a**2) xi``
    with ``a = exp(-step/theta)``.
    """
    z = rng.standard_normal(n)
    if sigma == 0.0:
        return np.zeros(n)
    a = math.exp(-step / theta)
    b = sigma * math.sqrt(-math.expm1(-2.0 * step / theta))
    x = b * z
    x[0] = sigma * z[0]
    # y[i] = a*y[i-1] + x[i], y[0] = x[0]
    return signal.lfilter([1.0], [1.0, -a], x)


def _validate_grid(params: ClockParams, horizon: float, dt: float):
    if params.model is not CorrelationModel.ORNSTEIN_UHLENBECK:
        raise ParameterError("path sampling is implemented for the Ornstein-Uhlenbeck model only")
    if not (dt > 0) or dt > params.theta / GRID_RESOLUTION * (1 + 1e-12):
        raise ParameterError(f"dt must satisfy 0 < dt <= theta/{GRID_RESOLUTION} = "
                             f"{params.theta / GRID_RESOLUTION}, got {dt}")
    if not (horizon >= dt):
        raise ParameterError(f"horizon ({horizon}) must be at least dt ({dt})")


def grid_size(horizon: float, dt: float) -> int:
    """Number of grid points t_i = i*dt covering [0, horizon]."""
    return int(math.floor(horizon / dt * (1 + 1e-12))) + 1


def sample_ou_path(params: ClockParams, horizon: float, dt: float, seed: int,
                   path_index: int = 0) -> NoisePath:
    """Sample a stationary OU relative-error path on t_i = i*dt, i*dt <= horizon.

    delta is the trapezoidal integral of alpha with delta[0] = 0. Samples with
    alpha <= -1 violate causality; they are counted, never rejected.
    """
    _validate_grid(params, horizon, dt)
    n = grid_size(horizon, dt)
    alpha = ou_series(n, dt, params.theta, params.kappa / params.theta,
                      path_rng(seed, path_index))
    delta = np.empty(n)
    delta[0] = 0.0
    np.cumsum(0.5 * dt * (alpha[1:] + alpha[:-1]), out=delta[1:])
    return NoisePath(dt, _ro(alpha), _ro(delta), int(np.count_nonzero(alpha <= -1.0)),
                     (int(seed), int(path_index)))


def sample_tick_sequence(params: ClockParams, n_ticks: int, seed: int,
                         path_index: int = 0) -> TickSequence:
    """Tick readings s_k = k eps + delta_k with delta_{k+1} = delta_k + eps alpha_k."""
    if params.model is not CorrelationModel.ORNSTEIN_UHLENBECK:
        raise ParameterError("tick sampling is implemented for the Ornstein-Uhlenbeck model only")
    if int(n_ticks) != n_ticks or n_ticks < 1:
        raise ParameterError(f"n_ticks must be a positive integer, got {n_ticks}")
    eps = params.epsilon
    alpha = ou_series(int(n_ticks), eps, params.theta, params.kappa / params.theta,
                      path_rng(seed, path_index))
    delta = np.empty(n_ticks + 1)
    delta[0] = 0.0
    np.cumsum(eps * alpha, out=delta[1:])
    ticks = eps * np.arange(n_ticks + 1) + delta
    return TickSequence(eps, _ro(ticks), _ro(alpha), _ro(delta),
                        int(np.count_nonzero(alpha <= -1.0)), (int(seed), int(path_index)))


def correlation(params: ClockParams, tau):
    """Stationary correlation c(tau) of alpha; even in tau.

    Tabulated models interpolate linearly and raise RangeError past the table.
    """
    t = np.abs(np.asarray(tau, dtype=float))
    if params.model is CorrelationModel.ORNSTEIN_UHLENBECK:
        out = params.c0 * np.exp(-t / params.theta)
    else:
        if np.any(t > params.tau_max):
            raise RangeError(f"|tau| exceeds the tabulated range {params.tau_max}")
        out = np.interp(t, params.table_tau, params.table_c)
    return float(out) if np.ndim(out) == 0 else out


def delta_variance(params: ClockParams, t):
    """Var[delta(t)] = int_0^t int_0^t c(|t1 - t2|), closed form for OU.

    For OU this is 2 kappa**2 (t/theta - 1 + exp(-t/theta)). Tabulated models
    use the reduction 2 int_0^t (t - tau) c(tau) dtau, with c taken as zero
    beyond the end of the table.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ParameterError("t must be non-negative")
    if params.model is CorrelationModel.ORNSTEIN_UHLENBECK:
        x = t_arr / params.theta
        # x - 1 + exp(-x) loses digits for small x; use the series there
        small = x < 1e-3
        xs = np.where(small, x, 0.0)
        series = xs ** 2 / 2 - xs ** 3 / 6 + xs ** 4 / 24
        out = 2.0 * params.kappa ** 2 * np.where(small, series, x - 1.0 + np.exp(-x))
    else:
        out = np.vectorize(lambda tt: _tabulated_delta_variance(params, tt))(t_arr)
    return float(out) if np.ndim(out) == 0 else out


def _tabulated_delta_variance(params: ClockParams, t: float) -> float:
    upper = min(t, params.tau_max)
    if upper == 0.0:
        return 0.0
    # (t - u) c(u) is quadratic on every table segment, so Simpson is exact
    tau = params.table_tau
    knots = np.concatenate((tau[tau < upper], [upper]))
    mid = 0.5 * (knots[1:] + knots[:-1])
    f = lambda u: (t - u) * np.interp(u, tau, params.table_c)
    h = np.diff(knots)
    return float(2.0 * np.sum(h / 6.0 * (f(knots[:-1]) + 4.0 * f(mid) + f(knots[1:]))))


def period_of_applicability(params: ClockParams, zeta: float) -> float:
    """Clock time zeta**2 theta / kappa**2 over which errors stay below zeta."""
    if not (zeta > 0):
        raise ParameterError(f"zeta must be positive, got {zeta}")
    if params.kappa == 0:
        return math.inf
    return zeta ** 2 * params.theta / params.kappa ** 2


@dataclass(frozen=True)
class ClockStats:
    mean_alpha: float
    c_hat: np.ndarray
    theta_hat: float | None
    kappa_hat: float | None
    variance_slope: float | None
    spacing: float
    n_paths: int
    n_samples: int
    causality_violations: int

    @property
    def diffusion_hat(self) -> float | None:
        """Estimated D from Var[delta] ~ 2 D t, i.e. half the variance slope."""
        return None if self.variance_slope is None else 0.5 * self.variance_slope

    def as_dict(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "n_samples_per_path": self.n_samples,
            "spacing": self.spacing,
            "mean_alpha": self.mean_alpha,
            "c_hat_0": float(self.c_hat[0]),
            "theta_hat": self.theta_hat,
            "kappa_hat": self.kappa_hat,
            "variance_slope": self.variance_slope,
            "diffusion_hat": self.diffusion_hat,
            "causality_violations": self.causality_violations,
        }

    def report(self) -> str:
        return textio.format_report(self.as_dict())

    def write_report(self, path):
        return textio.write_report(path, self.as_dict())


def estimate_stats(paths: Sequence[NoisePath | TickSequence], max_lag: int | None = None,
                   fit_from: float | None = None) -> ClockStats:
    """Empirical clock statistics from an ensemble of equal-length paths.

    The correlation uses the biased estimator c_j = (1/N) sum_i a_i a_{i+j}
    averaged over paths, without mean subtraction (good clocks have zero mean
    by construction). The correlation time is
    ``eps * sum_{|j| <= M} c_j / (2 c_0)`` with the window M chosen as the
    smallest lag satisfying ``M eps >= WINDOW_FACTOR * theta_hat(M)`` unless
    ``max_lag`` fixes it. kappa_hat = theta_hat sqrt(c_0).

    The variance slope is a least-squares line through <delta**2> against
    clock time over t >= ``fit_from`` (default 5 theta_hat, or the second half
    of the record when theta_hat is unavailable).
    """
    paths = list(paths)
    if not paths:
        raise ParameterError("estimate_stats needs at least one path")
    spacing = paths[0].spacing
    n = paths[0].alpha.size
    if any(p.alpha.size != n or p.spacing != spacing for p in paths):
        raise ParameterError("all paths must share length and spacing")
    if n < 2:
        raise ParameterError("paths must hold at least two samples")
    alpha = np.stack([p.alpha for p in paths])
    delta = np.stack([p.delta for p in paths])

    # per-path FFT autocorrelation, zero padded against wrap-around
    nfft = 1 << int(math.ceil(math.log2(2 * n)))
    spec = np.fft.rfft(alpha, nfft, axis=1)
    c_hat = np.fft.irfft(spec * spec.conj(), nfft, axis=1)[:, :n].mean(axis=0) / n
    c_hat[np.abs(c_hat) <= 1e-15 * max(np.abs(c_hat[0]), 1e-300)] = 0.0

    theta_hat = kappa_hat = None
    if c_hat[0] > 0:
        running = spacing * (c_hat[0] + 2.0 * np.concatenate(([0.0], np.cumsum(c_hat[1:])))) \
            / (2.0 * c_hat[0])
        if max_lag is None:
            ok = np.nonzero(spacing * np.arange(n) >= WINDOW_FACTOR * running)[0]
            window = int(ok[0]) if ok.size else n - 1
        else:
            window = max(0, min(int(max_lag), n - 1))
        theta_hat = float(running[window])
        if theta_hat > 0:
            kappa_hat = theta_hat * math.sqrt(c_hat[0])
        else:
            theta_hat = None

    t = spacing * np.arange(delta.shape[1])
    msd = np.mean(delta ** 2, axis=0)
    if fit_from is None:
        fit_from = 5.0 * theta_hat if theta_hat is not None else 0.5 * t[-1]
    sel = t >= fit_from
    slope = None
    if np.count_nonzero(sel) >= 2:
        slope = float(np.polyfit(t[sel], msd[sel], 1)[0]) + 0.0
    return ClockStats(
        mean_alpha=float(alpha.mean()),
        c_hat=_ro(c_hat),
        theta_hat=theta_hat,
        kappa_hat=kappa_hat,
        variance_slope=slope,
        spacing=spacing,
        n_paths=len(paths),
        n_samples=n,
        causality_violations=sum(p.causality_violations for p in paths),
    )
