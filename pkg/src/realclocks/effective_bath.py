"""Effective thermal bath reproducing the clock noise.

The bath coupling chi(omega) enters only through
``kB T_b chi(omega)**2 = S(omega) = int_0^inf c(tau) cos(omega tau) dtau``,
so S is the computed primitive and chi**2 follows from a chosen kB T_b
(kB = 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import textio
from .clock_models import ClockParams, CorrelationModel, correlation
from .errors import ParameterError

TAIL_CUTOFF = 40.0  # tabulated quadrature stops at 40 theta
OU_CUTOFF = 80.0


def _check_omega(omega):
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ParameterError("omega must be finite and non-negative")
    return w


def lorentzian(clock: ClockParams, omega):
    """OU spectral density kappa**2 / (theta (1 + omega**2 theta**2))."""
    w = _check_omega(omega)
    out = clock.kappa ** 2 / (clock.theta * (1.0 + (w * clock.theta) ** 2))
    return float(out) if np.ndim(out) == 0 else out


def spectral_density_quad(clock: ClockParams, omega: float) -> float:
    """Cosine transform of c by adaptive quadrature.

    OU clocks are integrated with a cosine-weighted rule up to 80 theta;
    tabulated ones are transformed exactly as piecewise-linear functions up
    to min(40 theta, end of table).
    """
    w = float(_check_omega(omega))
    if clock.c0 == 0:
        return 0.0
    if clock.model is CorrelationModel.ORNSTEIN_UHLENBECK:
        # exp(-80) is below double precision relative to c0
        upper = OU_CUTOFF * clock.theta
        val, _ = integrate.quad(lambda tau: correlation(clock, tau), 0.0, upper,
                                weight="cos", wvar=w, epsabs=1e-16 * clock.c0 * clock.theta,
                                epsrel=1e-12, limit=1000)
        return float(val)
    upper = min(TAIL_CUTOFF * clock.theta, clock.tau_max)
    return _piecewise_linear_cosine(clock.table_tau, clock.table_c, upper, w)


def _piecewise_linear_cosine(tau, c, upper: float, w: float) -> float:
    """Exact int_0^upper c(u) cos(w u) du for c linearly interpolated on ``tau``.

    Integration by parts per segment gives
    c(U) sin(wU)/w + sum_k slope_k (cos(w b_k) - cos(w a_k)) / w**2,
    written with sinc so that w -> 0 needs no special case.
    """
    knots = np.concatenate((tau[tau < upper], [upper]))
    vals = np.interp(knots, tau, c)
    h = np.diff(knots)
    slope = np.diff(vals) / h
    mid = 0.5 * (knots[1:] + knots[:-1])
    sinc = lambda x: np.sinc(x / math.pi)  # sin(x)/x
    boundary = vals[-1] * upper * sinc(w * upper)
    # (cos(wb) - cos(wa)) / w**2 = -h * (sin(w m)/w) * sinc(w h / 2)
    segments = -h * mid * sinc(w * mid) * sinc(0.5 * w * h)
    return float(boundary + np.sum(slope * segments))


def spectral_density(clock: ClockParams, omega):
    """S(omega) = int_0^inf c(tau) cos(omega tau) dtau, for omega >= 0."""
    w = _check_omega(omega)
    if clock.model is CorrelationModel.ORNSTEIN_UHLENBECK:
        return lorentzian(clock, w)
    out = np.vectorize(lambda x: spectral_density_quad(clock, x))(w)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class BathModel:
    """kB T_b and the tabulated chi(omega)**2 = S(omega) / (kB T_b)."""

    temperature_product: float
    omega: np.ndarray
    chi_squared: np.ndarray

    @classmethod
    def from_clock(cls, clock: ClockParams, temperature_product: float, omega) -> "BathModel":
        if not (temperature_product > 0):
            raise ParameterError("temperature_product must be positive")
        w = np.array(_check_omega(omega), dtype=float, ndmin=1)
        chi2 = np.asarray(spectral_density(clock, w), dtype=float).reshape(w.shape) / temperature_product
        w.setflags(write=False)
        chi2.setflags(write=False)
        return cls(temperature_product, w, chi2)

    def chi(self) -> np.ndarray:
        return np.sqrt(self.chi_squared)


def write_spectrum_csv(path, omega, S):
    return textio.write_csv(path, ["omega", "S"], zip(np.ravel(omega), np.ravel(S)))


def bath_consistency_check(clock: ClockParams, omega_max: float | None = None,
                           n_omega: int = 201, rtol: float = 1e-6) -> dict:
    """Zero-frequency identity S(0) = kappa**2/theta = D, plus the S(omega) table.

    S(0) is obtained by quadrature of the correlation function and compared
    with the master-equation diffusion constant; the closed-form Lorentzian is
    checked against quadrature on the table.
    """
    if clock.model is not CorrelationModel.ORNSTEIN_UHLENBECK:
        raise ParameterError("the consistency check is defined for the OU model")
    omega_max = 50.0 / clock.theta if omega_max is None else omega_max
    w = np.linspace(0.0, omega_max, n_omega)
    s_closed = np.asarray(lorentzian(clock, w))
    s_quad = np.array([spectral_density_quad(clock, x) for x in w])
    D = clock.diffusion
    s0 = s_quad[0]
    scale = np.where(s_closed > 0, s_closed, 1.0)
    rel = float(np.max(np.abs(s_quad - s_closed) / scale)) if clock.kappa > 0 else float(np.max(np.abs(s_quad)))
    s0_err = abs(s0 - D) / D if D > 0 else abs(s0)
    return {
        "theta": clock.theta,
        "kappa": clock.kappa,
        "diffusion": D,
        "S0_quadrature": s0,
        "S0_closed_form": float(s_closed[0]),
        "S0_relative_error": s0_err,
        "closed_vs_quadrature_max_rel_error": rel,
        "nonnegative": bool(np.all(s_quad >= -1e-15)),
        "pass": bool(s0_err < rtol and rel < rtol and np.all(s_quad >= -1e-15)),
        "omega": w,
        "S": s_closed,
        "S_quadrature": s_quad,
    }
