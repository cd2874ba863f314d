"""Real-clock master equation: rho' = -i[H, rho] - D [H, [H, rho]], D = kappa**2/theta.

Two engines are provided: a fixed-step classical RK4 integrator and the exact
element-wise solution in the energy eigenbasis,
``rho_nm(t) = rho_nm(0) exp(-i w_nm t - w_nm**2 D t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import textio
from .errors import ParameterError
from .quantum_core import DensityMatrix, Hamiltonian, von_neumann_entropy

STEP_FACTOR = 0.1
STEP_BLOCK = 4096


@dataclass(frozen=True, eq=False)
class MasterParams:
    H: Hamiltonian
    diffusion: float
    dt: float

    def __post_init__(self):
        if not (self.diffusion >= 0 and math.isfinite(self.diffusion)):
            raise ParameterError(f"diffusion must be non-negative, got {self.diffusion}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ParameterError(f"dt must be positive, got {self.dt}")

    @classmethod
    def from_clock(cls, H: Hamiltonian, clock, dt: float) -> "MasterParams":
        return cls(H, clock.diffusion, dt)

    def max_dt(self) -> float:
        """Largest step allowed by the accuracy bound."""
        wmax = self.H.max_gap
        bounds = [math.inf]
        if wmax > 0:
            bounds.append(STEP_FACTOR / wmax)
            if self.diffusion > 0:
                bounds.append(STEP_FACTOR / (self.diffusion * wmax ** 2))
        return min(bounds)

    def check_step(self, dt: float | None = None):
        dt = self.dt if dt is None else dt
        limit = self.max_dt()
        if dt > limit * (1 + 1e-12):
            raise ParameterError(f"step {dt} exceeds the stability/accuracy bound {limit}")

    @property
    def rates(self) -> np.ndarray:
        """Decay rate w_nm**2 D for every matrix element."""
        return self.H.gaps ** 2 * self.diffusion

    @property
    def generator(self) -> np.ndarray:
        """Element-wise eigenbasis generator -i w_nm - D w_nm**2."""
        g = self.H.gaps
        return -1j * g - self.diffusion * g ** 2


def suggest_dt(H: Hamiltonian, diffusion: float, t_final: float, tol: float = 1e-9) -> float:
    """RK4 step keeping the estimated global error of every element below ``tol``.

    Per step the relative error is about |h lam|**5 / 120 with
    lam = -i w - D w**2; it accumulates over min(t_final, 1/(D w**2)).
    The result never exceeds 0.02 / max|w_nm| or the accuracy bound.
    """
    g = np.abs(H.gaps)
    g = g[g > 0]
    if g.size == 0:
        return max(t_final, 1.0)
    lam = np.abs(-1j * g - diffusion * g ** 2)
    span = np.full(g.shape, float(t_final))
    if diffusion > 0:
        span = np.minimum(span, 1.0 / (diffusion * g ** 2))
    span = np.maximum(span, 1e-300)
    h = float(np.min((120.0 * tol / (lam ** 5 * span)) ** 0.25))
    cap = MasterParams(H, diffusion, 1.0).max_dt()
    return min(h, 0.02 / float(g.max()), cap)


def rhs(H: np.ndarray, diffusion: float, rho: np.ndarray) -> np.ndarray:
    """-i[H, rho] - D [H, [H, rho]]."""
    c = H @ rho - rho @ H
    return -1j * c - diffusion * (H @ c - c @ H)


def step_rk4(params: MasterParams, rho: DensityMatrix, dt: float | None = None) -> DensityMatrix:
    """One classical RK4 step, re-hermitized by (rho + rho^H)/2."""
    if rho.dim != params.H.dim:
        raise ParameterError("dimension mismatch between H and rho")
    h = params.dt if dt is None else dt
    params.check_step(h)
    H, d, y = params.H.matrix, params.diffusion, rho.matrix
    k1 = rhs(H, d, y)
    k2 = rhs(H, d, y + 0.5 * h * k1)
    k3 = rhs(H, d, y + 0.5 * h * k2)
    k4 = rhs(H, d, y + h * k3)
    out = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return DensityMatrix(0.5 * (out + out.conj().T), check=False)


def rk4_step_factor(generator: np.ndarray, h: float) -> np.ndarray:
    """Amplification of one RK4 step for the diagonal linear system y' = L y.

    Built from the same four stages as :func:`step_rk4`, applied to y = 1;
    since the eigenbasis generator is element-wise, the step is exactly
    multiplication by this factor.
    """
    y = np.ones_like(generator)
    k1 = generator * y
    k2 = generator * (y + 0.5 * h * k1)
    k3 = generator * (y + 0.5 * h * k2)
    k4 = generator * (y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def solve_exact(params: MasterParams, rho0: DensityMatrix, t: float) -> DensityMatrix:
    if not (t >= 0):
        raise ParameterError(f"t must be non-negative, got {t}")
    if rho0.dim != params.H.dim:
        raise ParameterError("dimension mismatch between H and rho")
    rho_e = params.H.to_eigenbasis(rho0.matrix) * np.exp(params.generator * t)
    out = params.H.from_eigenbasis(rho_e)
    return DensityMatrix(0.5 * (out + out.conj().T), check=False)


def decay_constants(params: MasterParams) -> list[tuple[int, int, float]]:
    """(n, m, w_nm**2 D) for every pair n < m of eigenstates."""
    r = params.rates
    n = r.shape[0]
    return [(i, j, float(r[i, j])) for i in range(n) for j in range(i + 1, n)]


def min_rate(params: MasterParams) -> float | None:
    """Slowest nonzero decoherence rate, D * min_gap**2."""
    mg = params.H.min_gap
    return None if mg is None else params.diffusion * mg ** 2


@dataclass
class Trajectory:
    times: np.ndarray
    states: list[DensityMatrix]
    entropies: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def element(self, n: int, m: int, eigenbasis: bool = False, H: Hamiltonian | None = None) -> np.ndarray:
        if eigenbasis:
            if H is None:
                raise ParameterError("eigenbasis view needs the Hamiltonian")
            return np.array([H.to_eigenbasis(s.matrix)[n, m] for s in self.states])
        return np.array([s.matrix[n, m] for s in self.states])

    def write_csv(self, path):
        dim = self.states[0].dim if self.states else 0
        idx = [(i, j) for i in range(dim) for j in range(dim)]
        header = ["t", "S"] + [f"re_rho_{i}_{j}" for i, j in idx] + [f"im_rho_{i}_{j}" for i, j in idx]
        rows = []
        for t, s, rho in zip(self.times, self.entropies, self.states):
            flat = rho.matrix.reshape(-1)
            rows.append([t, s, *flat.real, *flat.imag])
        return textio.write_csv(path, header, rows)


def integrate(params: MasterParams, rho0: DensityMatrix, t_final: float,
              record_every: int = 1) -> Trajectory:
    """Fixed-step RK4 trajectory from t = 0 to exactly ``t_final``.

    Stepping happens in the energy eigenbasis, where one RK4 step is the
    element-wise factor from :func:`rk4_step_factor`; the last step is
    shortened to land on ``t_final``. Snapshots every ``record_every`` steps
    (plus the final one) are transformed back and re-hermitized.

    Metadata records the minimum eigenvalue seen, the largest trace and
    hermiticity drift, and whether ``t_final`` exceeds the period of
    applicability 1/min_rate.
    """
    if not (t_final >= 0):
        raise ParameterError(f"t_final must be non-negative, got {t_final}")
    if int(record_every) != record_every or record_every < 1:
        raise ParameterError("record_every must be a positive integer")
    if rho0.dim != params.H.dim:
        raise ParameterError("dimension mismatch between H and rho")
    params.check_step()
    H = params.H
    h = params.dt
    n_full = int(math.floor(t_final / h * (1 + 1e-12)))
    if n_full * h > t_final:
        n_full -= 1
    remainder = t_final - n_full * h
    if remainder <= 1e-12 * max(h, t_final):
        remainder = 0.0

    gen = params.generator
    factor = rk4_step_factor(gen, h)
    y = H.to_eigenbasis(rho0.matrix)
    y = 0.5 * (y + y.conj().T)

    times, states, entropies = [], [], []
    meta = {"min_eigenvalue": math.inf, "max_trace_error": 0.0, "max_hermiticity_error": 0.0}

    def record(t, ye):
        rho = H.from_eigenbasis(ye)
        meta["max_hermiticity_error"] = max(meta["max_hermiticity_error"],
                                            float(np.max(np.abs(rho - rho.conj().T))))
        rho = 0.5 * (rho + rho.conj().T)
        meta["max_trace_error"] = max(meta["max_trace_error"], abs(np.trace(rho) - 1.0))
        lam = np.linalg.eigvalsh(rho)
        meta["min_eigenvalue"] = min(meta["min_eigenvalue"], float(lam[0]))
        dm = DensityMatrix(rho, check=False)
        lam = lam[lam > 0]
        times.append(t)
        states.append(dm)
        entropies.append(float(-np.sum(lam * np.log(lam))))

    record(0.0, y)
    # a block of steps is one sequential cumulative product
    k = 0
    while k < n_full:
        stop = min(n_full, (k // record_every + 1) * record_every, k + STEP_BLOCK)
        block = np.empty((stop - k + 1,) + y.shape, dtype=complex)
        block[0] = y
        block[1:] = factor
        y = np.cumprod(block, axis=0)[-1]
        k = stop
        if k % record_every == 0:
            record(t_final if (k == n_full and remainder == 0.0) else k * h, y)
    if remainder > 0.0:
        y = y * rk4_step_factor(gen, remainder)
        record(t_final, y)
    elif n_full % record_every != 0:
        record(t_final, y)

    rate = min_rate(params)
    applicability = math.inf if not rate else 1.0 / rate
    meta.update({
        "steps": n_full + (1 if remainder > 0.0 else 0),
        "dt": h,
        "last_step": remainder if remainder > 0.0 else h,
        "period_of_applicability": applicability,
        "beyond_applicability": t_final > applicability,
    })
    return Trajectory(np.array(times), states, np.array(entropies), meta)


def entropy_nondecreasing(traj: Trajectory, slack: float = 1e-10) -> bool:
    return bool(np.all(np.diff(traj.entropies) >= -slack))


def exact_trajectory(params: MasterParams, rho0: DensityMatrix, times) -> Trajectory:
    states = [solve_exact(params, rho0, float(t)) for t in times]
    ent = np.array([von_neumann_entropy(s) for s in states])
    return Trajectory(np.asarray(times, dtype=float), states, ent)


def max_deviation(a: Trajectory, b: Trajectory) -> float:
    if len(a) != len(b) or not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
        raise ParameterError("trajectories are not on the same time grid")
    return max(float(np.max(np.abs(x.matrix - y.matrix))) for x, y in zip(a.states, b.states))


def fit_decay_rate(times, values) -> float:
    """Slope of -log|values| against time by least squares."""
    v = np.abs(np.asarray(values))
    return float(-np.polyfit(np.asarray(times, dtype=float), np.log(v), 1)[0])
