"""Angle dynamics of H = omega J under real-clock noise.

The density on the circle obeys

    d_t rho = omega d_phi rho + omega**2 D d_phi**2 rho,    D = kappa**2 / theta,

solved either on a uniform grid (centered differences, RK4 in time) or exactly
mode by mode. With rho(phi) = sum_m c_m exp(i m phi) each coefficient evolves
as c_m(t) = c_m(0) exp(i m omega t - m**2 omega**2 D t), so a bump drifts
towards decreasing phi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import textio
from .errors import IntegrityError, ParameterError

TWO_PI = 2.0 * math.pi
NEGATIVE_TOL = 1e-12


def _ro(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def phi_grid(n_grid: int) -> np.ndarray:
    return TWO_PI * np.arange(n_grid) / n_grid


@dataclass(frozen=True, eq=False)
class AngleDistribution:
    """Probability density sampled at phi_i = 2 pi i / n_grid."""

    values: np.ndarray
    omega: float = 1.0
    diffusion: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 3:
            raise ParameterError("values must be a 1-D array of at least 3 points")
        if np.min(v) < -NEGATIVE_TOL:
            raise IntegrityError(f"density has negative value {np.min(v):.3e}")
        v = np.where(v < 0.0, 0.0, v)
        object.__setattr__(self, "values", _ro(v))
        if not (self.diffusion >= 0):
            raise ParameterError("diffusion must be non-negative")

    @property
    def n_grid(self) -> int:
        return self.values.size

    @property
    def phi(self) -> np.ndarray:
        return phi_grid(self.n_grid)

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n_grid

    def total(self) -> float:
        return float(self.spacing * np.sum(self.values))

    @classmethod
    def uniform(cls, n_grid: int, omega: float = 1.0, diffusion: float = 0.0):
        return cls(np.full(n_grid, 1.0 / TWO_PI), omega, diffusion)

    @classmethod
    def von_mises(cls, n_grid: int, mu: float, concentration: float,
                  omega: float = 1.0, diffusion: float = 0.0):
        phi = phi_grid(n_grid)
        # exp(k (cos - 1)) / (2 pi I0e(k)) stays finite for large k
        v = np.exp(concentration * (np.cos(phi - mu) - 1.0)) / (TWO_PI * special.i0e(concentration))
        return cls(v, omega, diffusion)

    def write_csv(self, path):
        return textio.write_csv(path, ["phi", "rho"], zip(self.phi, self.values))


@dataclass(frozen=True, eq=False)
class FourierModes:
    """Coefficients c_m, m = -M..M, of rho(phi) = sum_m c_m exp(i m phi)."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.ndim != 1 or c.size % 2 == 0:
            raise ParameterError("coefficients must be a 1-D array of odd length 2M+1")
        object.__setattr__(self, "coefficients", _ro(c, complex))

    @property
    def M(self) -> int:
        return self.coefficients.size // 2

    @property
    def m(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    def mode(self, m: int) -> complex:
        if abs(m) > self.M:
            return 0.0j
        return complex(self.coefficients[m + self.M])

    @classmethod
    def von_mises(cls, mu: float, concentration: float, n_modes: int) -> "FourierModes":
        m = np.arange(-n_modes, n_modes + 1)
        c = special.ive(np.abs(m), concentration) / special.i0e(concentration) / TWO_PI
        return cls(c * np.exp(-1j * m * mu))

    @classmethod
    def from_grid(cls, dist: AngleDistribution, n_modes: int | None = None) -> "FourierModes":
        n = dist.n_grid
        M = n // 2 - 1 if n_modes is None else n_modes
        if M > (n - 1) // 2:
            raise ParameterError(f"{M} modes exceed the grid Nyquist limit")
        f = np.fft.fft(dist.values) / n
        m = np.arange(-M, M + 1)
        return cls(f[m % n])

    def evaluate(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        vals = np.real(np.exp(1j * np.multiply.outer(phi, self.m)) @ self.coefficients)
        return vals

    def to_distribution(self, n_grid: int, omega: float = 1.0, diffusion: float = 0.0,
                        clamp: float = NEGATIVE_TOL) -> AngleDistribution:
        """Sample on the grid; values in [-clamp, 0) are clamped to 0."""
        if self.M > (n_grid - 1) // 2:
            raise ParameterError(f"n_grid={n_grid} cannot represent {self.M} modes")
        v = self.evaluate(phi_grid(n_grid))
        if np.min(v) < -clamp:
            raise IntegrityError(f"mode sum is negative ({np.min(v):.3e}); "
                                 "the truncated density is not yet smooth")
        return AngleDistribution(np.where(v < 0.0, 0.0, v), omega, diffusion)

    def angular_variance(self) -> float:
        """2 (1 - |<exp(i phi)>|): about var(phi) for narrow densities, 2 when uniform."""
        resultant = abs(TWO_PI * self.mode(-1))
        return 2.0 * (1.0 - resultant)

    def write_csv(self, path):
        c = self.coefficients
        return textio.write_csv(path, ["m", "re", "im"], zip(self.m, c.real, c.imag))


def delta_release(phi0: float, n_modes: int) -> FourierModes:
    """Truncated series of delta(phi - phi0): c_m = exp(-i m phi0) / 2 pi."""
    if int(n_modes) != n_modes or n_modes < 1:
        raise ParameterError("n_modes must be a positive integer")
    m = np.arange(-n_modes, n_modes + 1)
    return FourierModes(np.exp(-1j * m * phi0) / TWO_PI)


def evolve_modes(modes: FourierModes, omega: float, D: float, t: float) -> FourierModes:
    if not (t >= 0):
        raise ParameterError(f"t must be non-negative, got {t}")
    m = modes.m
    factor = np.exp(1j * m * omega * t - (m * omega) ** 2 * D * t)
    return FourierModes(modes.coefficients * factor)


def max_stable_dt(n_grid: int, omega: float, D: float) -> float:
    dphi = TWO_PI / n_grid
    bounds = [math.inf]
    if omega != 0:
        bounds.append(0.5 * dphi / abs(omega))
        if D > 0:
            bounds.append(0.25 * dphi ** 2 / (omega ** 2 * D))
    return min(bounds)


def _rhs(rho: np.ndarray, adv: float, dif: float) -> np.ndarray:
    up = np.roll(rho, -1)
    down = np.roll(rho, 1)
    return adv * (up - down) + dif * (up - 2.0 * rho + down)


def evolve_grid(dist: AngleDistribution, t_final: float, dt: float) -> AngleDistribution:
    """Explicit finite differences on the periodic grid.

    Centered first difference for advection, centered second difference for
    diffusion, classical RK4 in time; the last step is shortened to land on
    ``t_final``.
    """
    if not (t_final >= 0):
        raise ParameterError(f"t_final must be non-negative, got {t_final}")
    omega, D = dist.omega, dist.diffusion
    limit = max_stable_dt(dist.n_grid, omega, D)
    if not (dt > 0) or dt > limit * (1 + 1e-12):
        raise ParameterError(f"dt={dt} violates the stability bound {limit}")
    dphi = dist.spacing
    adv = omega / (2.0 * dphi)
    dif = omega ** 2 * D / dphi ** 2
    y = np.array(dist.values, dtype=float)

    def step(y, h):
        k1 = _rhs(y, adv, dif)
        k2 = _rhs(y + 0.5 * h * k1, adv, dif)
        k3 = _rhs(y + 0.5 * h * k2, adv, dif)
        k4 = _rhs(y + h * k3, adv, dif)
        return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    n_full = int(math.floor(t_final / dt * (1 + 1e-12)))
    if n_full * dt > t_final:
        n_full -= 1
    for _ in range(n_full):
        y = step(y, dt)
    rem = t_final - n_full * dt
    if rem > 1e-12 * max(dt, t_final):
        y = step(y, rem)
    if np.min(y) < -NEGATIVE_TOL:
        raise IntegrityError(f"grid solution went negative ({np.min(y):.3e})")
    return AngleDistribution(np.where(y < 0.0, 0.0, y), omega, D)


def fit_mode_decay(times, coefficients) -> float:
    """Decay rate from a log-linear least-squares fit of |c_m(t)|."""
    return float(-np.polyfit(np.asarray(times, dtype=float),
                             np.log(np.abs(np.asarray(coefficients))), 1)[0])


def peak_position(dist: AngleDistribution) -> float:
    """Circular mean angle of the density, in [0, 2 pi)."""
    z = np.sum(dist.values * np.exp(1j * dist.phi))
    return float(np.angle(z) % TWO_PI)
