import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from realclocks import master_equation as me
from realclocks import quantum_core as qc
from realclocks.clock_models import ClockParams
from realclocks.errors import ParameterError


def _system(seed=0, dim=3, D=0.05):
    rng = np.random.default_rng(seed)
    H = qc.Hamiltonian(qc.random_hermitian(dim, rng))
    rho = qc.random_density_matrix(dim, rng)
    return me.MasterParams(H, D, 0.002), rho


def test_rhs_is_double_commutator():
    p, rho = _system()
    h, r = p.H.matrix, rho.matrix
    comm = h @ r - r @ h
    expected = -1j * comm - p.diffusion * (h @ comm - comm @ h)
    np.testing.assert_allclose(me.rhs(h, p.diffusion, r), expected, atol=1e-14)


def test_generic_step_matches_eigenbasis_step():
    p, rho = _system(1)
    one = me.step_rk4(p, rho)
    traj = me.integrate(p, rho, p.dt)
    np.testing.assert_allclose(traj.states[-1].matrix, one.matrix, atol=1e-14)


def test_integrate_against_scipy_ode():
    p, rho = _system(2, dim=4, D=0.02)
    d = p.H.dim
    h = p.H.matrix

    def f(t, y):
        return me.rhs(h, p.diffusion, y.reshape(d, d)).reshape(-1)

    t_final = 3.0
    sol = solve_ivp(f, (0, t_final), rho.matrix.reshape(-1).astype(complex), method="DOP853",
                    rtol=1e-12, atol=1e-14)
    traj = me.integrate(p, rho, t_final)
    np.testing.assert_allclose(traj.states[-1].matrix, sol.y[:, -1].reshape(d, d), atol=1e-9)


def test_exact_solution_matches_integrator():
    p, rho = _system(3)
    traj = me.integrate(p, rho, 10.0, record_every=50)
    exact = me.exact_trajectory(p, rho, traj.times)
    assert me.max_deviation(traj, exact) < 1e-8
    assert traj.times[-1] == 10.0


def test_shortened_last_step():
    p, rho = _system(4)
    traj = me.integrate(p, rho, 0.021)
    assert traj.times[-1] == 0.021
    assert traj.metadata["steps"] == 11
    assert traj.metadata["last_step"] == pytest.approx(0.001)
    assert np.abs(traj.states[-1].matrix - me.solve_exact(p, rho, 0.021).matrix).max() < 1e-12


def test_invariants_along_trajectory():
    p, rho = _system(5, dim=4)
    traj = me.integrate(p, rho, 50.0, record_every=100)
    assert traj.metadata["max_trace_error"] < 1e-12
    assert traj.metadata["min_eigenvalue"] > -1e-10
    assert me.entropy_nondecreasing(traj)
    pops = [np.real(np.diag(p.H.to_eigenbasis(s.matrix))) for s in traj.states]
    np.testing.assert_allclose(pops, np.repeat(pops[:1], len(pops), axis=0), atol=1e-12)


def test_zero_diffusion_is_unitary():
    p, rho = _system(6, D=0.0)
    traj = me.integrate(p, rho, 2.0)
    ref = qc.evolve_unitary(p.H, rho, 2.0)
    np.testing.assert_allclose(traj.states[-1].matrix, ref.matrix, atol=1e-9)
    assert me.min_rate(p) == 0.0
    assert traj.metadata["period_of_applicability"] == math.inf


def test_decay_constants_and_fit():
    H = qc.Hamiltonian.diagonal([0.0, 1.0, 3.0])
    clock = ClockParams(theta=0.1, kappa=0.01)
    p = me.MasterParams.from_clock(H, clock, 0.01)
    D = clock.diffusion
    assert me.decay_constants(p) == [(0, 1, pytest.approx(D)), (0, 2, pytest.approx(9 * D)),
                                     (1, 2, pytest.approx(4 * D))]
    assert me.min_rate(p) == pytest.approx(D)
    rho = qc.DensityMatrix.plus(3)
    traj = me.integrate(p, rho, 200.0, record_every=1000)
    rate = me.fit_decay_rate(traj.times, traj.element(0, 1))
    assert rate == pytest.approx(D, rel=1e-6)


def test_step_bound_rejected():
    H = qc.Hamiltonian.diagonal([0.0, 10.0])
    with pytest.raises(ParameterError):
        me.integrate(me.MasterParams(H, 0.0, 0.05), qc.DensityMatrix.plus(2), 1.0)
    with pytest.raises(ParameterError):
        me.MasterParams(H, -1.0, 0.01)
    with pytest.raises(ParameterError):
        me.integrate(me.MasterParams(H, 0.0, 0.001), qc.DensityMatrix.plus(3), 1.0)


def test_suggest_dt_meets_tolerance():
    H = qc.Hamiltonian.diagonal([0.0, 0.7, 1.9])
    D = 1e-3
    T = 400.0
    dt = me.suggest_dt(H, D, T, tol=1e-9)
    p = me.MasterParams(H, D, dt)
    rho = qc.DensityMatrix.plus(3)
    traj = me.integrate(p, rho, T, record_every=5000)
    assert me.max_deviation(traj, me.exact_trajectory(p, rho, traj.times)) < 1e-8


def test_beyond_applicability_flag():
    H = qc.Hamiltonian.diagonal([0.0, 1.0])
    p = me.MasterParams(H, 0.1, 0.05)
    assert not me.integrate(p, qc.DensityMatrix.plus(2), 5.0).metadata["beyond_applicability"]
    assert me.integrate(p, qc.DensityMatrix.plus(2), 20.0).metadata["beyond_applicability"]


def test_trajectory_csv(tmp_path):
    from realclocks import textio
    p, rho = _system(7, dim=2)
    traj = me.integrate(p, rho, 0.02)
    traj.write_csv(tmp_path / "t.csv")
    header, data, _ = textio.read_csv(tmp_path / "t.csv")
    assert header[:3] == ["t", "S", "re_rho_0_0"] and header[-1] == "im_rho_1_1"
    assert data.shape == (11, 2 + 8)
    assert data[-1, 0] == 0.02
