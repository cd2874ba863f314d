"""Dense linear algebra for small Hilbert spaces (hbar = 1).

All dynamics happen in the energy eigenbasis: a :class:`Hamiltonian` is
diagonalized once on construction with a cyclic complex Jacobi iteration and
the eigendecomposition is cached.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import textio
from .errors import IntegrityError, NumericalError, ParameterError

MAX_DIM = 64
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-10
JACOBI_TOL = 1e-13
MAX_SWEEPS = 100


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def hermiticity_error(matrix) -> float:
    """Max |A - A^H| relative to the largest entry of A (0 for A = 0)."""
    a = np.asarray(matrix)
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(a - a.conj().T)) / scale)


def _check_square(matrix) -> np.ndarray:
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ParameterError(f"expected a non-empty square matrix, got shape {a.shape}")
    if a.shape[0] > MAX_DIM:
        raise ParameterError(f"dimension {a.shape[0]} exceeds the cap of {MAX_DIM}")
    if not np.all(np.isfinite(a)):
        raise ParameterError("matrix contains non-finite entries")
    return a


def diagonalize(matrix) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a hermitian matrix by cyclic Jacobi rotations.

    Each rotation first removes the phase of the pivot ``a[p, q]`` and then
    applies a real plane rotation that annihilates it. Sweeps stop once every
    off-diagonal magnitude is below ``1e-13 * max|a|``.

    Returns
    -------
    eigenvalues : ndarray, ascending
    eigenvectors : ndarray, unitary, columns are eigenvectors. The largest
        magnitude component of each column is real and positive.
    """
    a = _check_square(matrix)
    if hermiticity_error(a) > HERMITIAN_TOL:
        raise ParameterError("matrix is not hermitian")
    n = a.shape[0]
    a = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=complex)
    scale = float(np.max(np.abs(a)))
    threshold = JACOBI_TOL * scale

    def off_max() -> float:
        if n == 1:
            return 0.0
        return float(np.max(np.abs(a[~np.eye(n, dtype=bool)])))

    sweeps = 0
    while off_max() >= threshold and scale > 0.0:
        if sweeps >= MAX_SWEEPS:
            raise NumericalError(f"Jacobi iteration did not converge in {MAX_SWEEPS} sweeps")
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag == 0.0 or mag < 1e-3 * threshold:
                    continue
                # phase rotation on index q makes a[p, q] real and positive
                phase = apq / mag
                a[:, q] *= phase.conjugate()
                a[q, :] *= phase
                v[:, q] *= phase.conjugate()
                app, aqq = a[p, p].real, a[q, q].real
                theta = (aqq - app) / (2.0 * mag)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                a[p, p] = app - t * mag
                a[q, q] = aqq + t * mag
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq

    evals = np.real(np.diag(a)).copy()
    order = np.argsort(evals, kind="stable")
    evals = evals[order]
    v = v[:, order]
    for k in range(n):
        i = int(np.argmax(np.abs(v[:, k])))
        ph = v[i, k] / abs(v[i, k])
        v[:, k] *= ph.conjugate()
        v[i, k] = abs(v[i, k])
    return evals, v


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Hermitian generator with a cached eigendecomposition."""

    matrix: np.ndarray
    eigenvalues: np.ndarray = field(init=False, repr=False)
    eigenvectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = _check_square(self.matrix)
        evals, evecs = diagonalize(m)
        evals = np.array(evals)
        evals.setflags(write=False)
        object.__setattr__(self, "matrix", _frozen(m))
        object.__setattr__(self, "eigenvalues", evals)
        object.__setattr__(self, "eigenvectors", _frozen(evecs))

    @classmethod
    def from_eigensystem(cls, eigenvalues, unitary) -> "Hamiltonian":
        u = np.asarray(unitary, dtype=complex)
        h = (u * np.asarray(eigenvalues, dtype=float)) @ u.conj().T
        return cls(0.5 * (h + h.conj().T))

    @classmethod
    def diagonal(cls, energies) -> "Hamiltonian":
        return cls(np.diag(np.asarray(energies, dtype=float)).astype(complex))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def gaps(self) -> np.ndarray:
        """Matrix of Bohr frequencies omega_nm = omega_n - omega_m."""
        w = self.eigenvalues
        return w[:, None] - w[None, :]

    def _degeneracy_tol(self) -> float:
        return 1e-9 * max(1.0, float(np.max(np.abs(self.eigenvalues))))

    @property
    def min_gap(self) -> float | None:
        """Smallest nonzero |omega_n - omega_m|, None if fully degenerate."""
        g = np.abs(self.gaps)
        g = g[g > self._degeneracy_tol()]
        return float(g.min()) if g.size else None

    @property
    def max_gap(self) -> float:
        return float(np.max(np.abs(self.gaps)))

    @property
    def zeta(self) -> float | None:
        """Characteristic evolution time 1/min_gap."""
        mg = self.min_gap
        return None if mg is None else 1.0 / mg

    def to_eigenbasis(self, rho) -> np.ndarray:
        u = self.eigenvectors
        return u.conj().T @ np.asarray(rho) @ u

    def from_eigenbasis(self, rho_e) -> np.ndarray:
        u = self.eigenvectors
        return u @ np.asarray(rho_e) @ u.conj().T

    @classmethod
    def load(cls, path) -> "Hamiltonian":
        return cls(textio.read_matrix(path))

    def save(self, path):
        return textio.write_matrix(path, self.matrix)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix.

    Validation can be skipped with ``check=False`` for intermediate results
    whose positivity is monitored by the caller instead.
    """

    matrix: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = _check_square(self.matrix)
        if self.check:
            if hermiticity_error(m) > HERMITIAN_TOL:
                raise IntegrityError("density matrix is not hermitian")
            tr = np.trace(m)
            if abs(tr - 1.0) > TRACE_TOL:
                raise IntegrityError(f"density matrix trace is {tr}, expected 1")
            lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
            if lam[0] < -POSITIVITY_TOL:
                raise IntegrityError(f"density matrix has eigenvalue {lam[0]:.3e}")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    @classmethod
    def plus(cls, dim: int = 2) -> "DensityMatrix":
        """Uniform superposition of the computational basis states."""
        return cls.pure(np.ones(dim))

    def min_eigenvalue(self) -> float:
        m = self.matrix
        return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])

    @classmethod
    def load(cls, path) -> "DensityMatrix":
        return cls(textio.read_matrix(path))

    def save(self, path):
        return textio.write_matrix(path, self.matrix)


def _check_dims(h: Hamiltonian, rho: DensityMatrix):
    if h.dim != rho.dim:
        raise ParameterError(f"dimension mismatch: H is {h.dim}, rho is {rho.dim}")


def evolve_unitary(h: Hamiltonian, rho0: DensityMatrix, s: float) -> DensityMatrix:
    """Return exp(-iHs) rho0 exp(iHs), applied as phases in the eigenbasis."""
    _check_dims(h, rho0)
    rho_e = h.to_eigenbasis(rho0.matrix)
    rho_e = rho_e * np.exp(-1j * h.gaps * s)
    out = h.from_eigenbasis(rho_e)
    return DensityMatrix(0.5 * (out + out.conj().T), check=False)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """-sum(lam * ln lam) with 0 ln 0 = 0; tiny negative eigenvalues clamp to 0."""
    m = rho.matrix
    lam = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    if lam[0] < -POSITIVITY_TOL:
        raise IntegrityError(f"eigenvalue {lam[0]:.3e} below -{POSITIVITY_TOL}")
    lam = lam[lam > 0.0]
    return float(-np.sum(lam * np.log(lam)))


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    """GUE-like random hermitian matrix."""
    x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return 0.5 * (x + x.conj().T)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(x)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)
