"""Scheme dispatch, conservation laws, and limits of the trajectory solver."""

from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from vaet.bath import BathSpec, CorrelationTable, memory_kernels
from vaet.errors import ConfigurationError
from vaet.hilbert import SystemParams, build_hamiltonian, spectral_norm
from vaet.noise import derive_seed
from vaet.propagator import (
    PropagatorConfig,
    TrajectoryTables,
    assemble_tables,
    resolve_dt,
    run_ensemble,
    run_trajectory,
    validate_scheme_inputs,
)

DUMMY_BATH = BathSpec(family="ohmic", alpha=5e-4, temperature=0.025,
                      gamma_E=0.05, omega_c=0.5)


def _prop(scheme, **kw):
    base = dict(scheme=scheme, dt=0.1, n_steps=100, n_traj=20,
                master_seed=3)
    base.update(kw)
    return PropagatorConfig(**base)


def test_resolve_dt_default_tracks_spectral_norm():
    system = SystemParams(epsilon=0.3, delta=0.05, omega_v=0.2, gamma=0.04,
                          fock_dim=3)
    h_norm = spectral_norm(build_hamiltonian(system))
    assert resolve_dt(system, None) == pytest.approx(0.1 / h_norm)
    assert resolve_dt(system, 0.07) == 0.07


def test_closed_scheme_rejects_environment_coupling():
    with pytest.raises(ConfigurationError):
        validate_scheme_inputs("closed", "diagonal", DUMMY_BATH)
    # A fully decoupled bath spec is harmless.
    idle = BathSpec(family="ohmic", alpha=0.0, temperature=0.025,
                    gamma_E=0.0, omega_c=0.5)
    validate_scheme_inputs("closed", "diagonal", idle)


def test_open_schemes_require_bath():
    for scheme in ("markov", "nonmarkov"):
        with pytest.raises(ConfigurationError):
            validate_scheme_inputs(scheme, "diagonal", None)


def test_closed_ensemble_uses_single_trajectory():
    system = SystemParams(epsilon=0.1, delta=0.05, omega_v=0.2, gamma=0.0,
                          fock_dim=2)
    res = run_ensemble(system, None, _prop("closed", n_traj=64))
    assert res.n_traj_used == 1
    assert res.scheme == "closed"
    assert_allclose(res.populations.sum(axis=1), 1.0, atol=1e-10)


@pytest.mark.parametrize("scheme", ["markov", "nonmarkov"])
def test_sigma_z_conserved_without_tunneling(scheme):
    # delta = 0 with diagonal coupling: the electronic projector commutes
    # with both the Hamiltonian and every noise term, so P_D stays 1.
    system = SystemParams(epsilon=0.25, delta=0.0, omega_v=0.15, gamma=0.1,
                          fock_dim=4)
    prop = _prop(scheme, dt=None, n_steps=400, n_traj=8)
    res = run_ensemble(system, DUMMY_BATH, prop, coupling="diagonal")
    assert np.max(np.abs(res.populations[:, 0] - 1.0)) < 1e-10


def test_markov_with_zero_coupling_matches_closed():
    system = SystemParams(epsilon=0.1487, delta=0.02, omega_v=0.1, gamma=0.05,
                          fock_dim=3)
    idle = replace(DUMMY_BATH, gamma_E=0.0)
    closed = run_ensemble(system, None, _prop("closed", n_steps=500))
    noisy = run_ensemble(system, idle, _prop("markov", n_steps=500, n_traj=3))
    assert np.max(np.abs(closed.populations - noisy.populations)) < 1e-12


def test_nonmarkov_with_silent_bath_matches_closed():
    # alpha = 0 zeroes C(t); the memory integrator must then reduce to
    # plain unitary RK4, exercising the zero-table branch.
    system = SystemParams(epsilon=0.1487, delta=0.02, omega_v=0.1, gamma=0.05,
                          fock_dim=3)
    silent = BathSpec(family="ohmic", alpha=0.0, temperature=0.025,
                      gamma_E=0.05, omega_c=0.5)
    closed = run_ensemble(system, None, _prop("closed", n_steps=400))
    nm = run_ensemble(system, silent, _prop("nonmarkov", n_steps=400,
                                            n_traj=2))
    assert np.max(np.abs(closed.populations - nm.populations)) < 1e-12


def test_norm_drift_without_renormalization():
    # In the resolved regime (|H| dt ~ 0.013) the RK4 amplitude error stays
    # below 1e-8 over 1e4 steps even with renormalization disabled.
    system = SystemParams(epsilon=0.1, delta=0.02, omega_v=0.05, gamma=0.01,
                          fock_dim=2)
    prop = _prop("closed", dt=0.1, n_steps=10000, n_traj=1,
                 renormalize_each_step=False, out_stride=100)
    states, status = run_trajectory(system, None, prop)
    assert status == 0
    norms = np.sqrt(np.einsum("ti,ti->t", states, np.conj(states)).real)
    assert np.max(np.abs(norms - 1.0)) < 1e-8


def test_population_trace_converged_in_dt():
    system = SystemParams(epsilon=0.1487, delta=1e-4, omega_v=0.1487,
                          gamma=0.1, fock_dim=6)
    # dt must respect the stability bound dt*||H|| <= 0.1 (||H|| = 1.09 here)
    coarse = run_ensemble(system, None,
                          _prop("closed", dt=0.08, n_steps=750, out_stride=2))
    fine = run_ensemble(system, None,
                        _prop("closed", dt=0.04, n_steps=1500, out_stride=4))
    assert_allclose(coarse.t, fine.t, rtol=1e-12)
    assert np.max(np.abs(coarse.populations[:, 0]
                         - fine.populations[:, 0])) < 1e-3


def _ou_half_grid_factory(kappa, h, n_half):
    """Unit-variance stationary exponential process on the half grid."""
    theta = np.exp(-kappa * h)
    sigma = np.sqrt(1.0 - theta * theta)

    def factory(seed):
        rng = np.random.Generator(np.random.PCG64(seed))
        g = rng.standard_normal(n_half)
        z = np.empty(n_half)
        z[0] = g[0]
        for j in range(1, n_half):
            z[j] = theta * z[j - 1] + sigma * g[j]
        return np.ascontiguousarray(z.astype(np.complex128))

    return factory


def test_short_memory_limit_reproduces_white_noise_scheme():
    # An exponential unit-covariance drive with decay kappa carries white
    # intensity 2/kappa; the matched white-noise run uses
    # gamma_M = gamma_E sqrt(2/kappa). For kappa well above every system
    # rate the two ensembles must agree within counting noise.
    system = SystemParams(epsilon=0.0, delta=0.4, omega_v=1.0, gamma=0.0,
                          fock_dim=1)
    kappa, gamma_e = 4.0, 0.3
    gamma_m = gamma_e * np.sqrt(2.0 / kappa)
    dt, n_steps, n_traj = 0.05, 800, 200
    half = 0.5 * dt
    n_half = 2 * n_steps + 1
    t_half = half * np.arange(n_half)
    c_hat = np.exp(-kappa * t_half).astype(np.complex128)
    kern = memory_kernels(CorrelationTable(dt=half, values=c_hat))
    cut = int(np.searchsorted(-c_hat.real, -1e-9)) + 1
    tables = TrajectoryTables(
        kind="nm", dt=dt, gamma_e=gamma_e, c_hat=c_hat[:max(cut, 2)],
        g0=kern.g0, g1=kern.g1,
        noise_factory=_ou_half_grid_factory(kappa, half, n_half))
    prop_nm = _prop("nonmarkov", dt=dt, n_steps=n_steps, n_traj=n_traj,
                    master_seed=19, out_stride=8, chunk_size=25)
    nm = run_ensemble(system, DUMMY_BATH, prop_nm, "diagonal", tables=tables)

    bath_m = replace(DUMMY_BATH, gamma_E=float(gamma_m))
    prop_mk = replace(prop_nm, scheme="markov", master_seed=20)
    mk = run_ensemble(system, bath_m, prop_mk, "diagonal")

    se = np.sqrt(nm.convergence_diag["block_se_pd"] ** 2
                 + mk.convergence_diag["block_se_pd"] ** 2)
    diff = nm.populations[:, 0] - mk.populations[:, 0]
    # Time-averaged comparison: 3 combined-SE band (the pointwise SE is an
    # upper bound for the SE of the average).
    assert abs(np.mean(diff[1:])) <= 3.0 * np.mean(se[1:])
    assert np.max(np.abs(diff[1:])) <= 5.0 * np.max(se[1:])


def test_ensemble_determinism_across_workers():
    system = SystemParams(epsilon=0.1487, delta=0.01, omega_v=0.1, gamma=0.0,
                          fock_dim=2)
    prop1 = _prop("markov", n_steps=200, n_traj=30, chunk_size=10)
    a = run_ensemble(system, DUMMY_BATH, prop1)
    b = run_ensemble(system, DUMMY_BATH, prop1)
    c = run_ensemble(system, DUMMY_BATH, replace(prop1, n_workers=3))
    assert np.array_equal(a.rho, b.rho)
    assert np.array_equal(a.rho, c.rho)
    assert np.array_equal(a.populations, c.populations)


def test_full_density_storage_layout():
    system = SystemParams(epsilon=0.2, delta=0.05, omega_v=0.15, gamma=0.08,
                          fock_dim=3)
    prop = _prop("markov", n_steps=60, n_traj=12, store_full_density=True)
    res = run_ensemble(system, DUMMY_BATH, prop)
    assert res.rho.shape == (61, 6, 6)
    p_d = np.einsum("tnn->t", res.rho[:, :3, :3]).real
    assert_allclose(res.populations[:, 0], p_d, atol=1e-12)
    reduced = run_ensemble(system, DUMMY_BATH,
                           replace(prop, store_full_density=False))
    assert reduced.rho.shape == (61, 2, 2)
    assert np.array_equal(reduced.populations, res.populations)


def test_coherence_and_time_units():
    from vaet.constants import HBAR_EV_PS
    system = SystemParams(epsilon=0.1, delta=0.05, omega_v=0.2, gamma=0.0,
                          fock_dim=2)
    res = run_ensemble(system, None, _prop("closed", n_steps=50))
    assert_allclose(res.t_ps, res.t * HBAR_EV_PS)
    assert res.coherence.shape == (51,)
    assert_allclose(res.coherence, res.rho[:, 0, 1], atol=1e-15)


def test_run_trajectory_matches_seeded_ensemble_member():
    system = SystemParams(epsilon=0.1487, delta=0.01, omega_v=0.1, gamma=0.0,
                          fock_dim=2)
    prop = _prop("markov", n_steps=100, n_traj=1, master_seed=40)
    tables = assemble_tables(system, DUMMY_BATH, prop, "diagonal")
    states, status = run_trajectory(system, DUMMY_BATH, prop,
                                    seed=derive_seed(40, 0), tables=tables)
    assert status == 0
    res = run_ensemble(system, DUMMY_BATH, prop, tables=tables)
    nrm2 = np.einsum("ti,ti->t", states, np.conj(states)).real
    p_d = (np.abs(states[:, :2]) ** 2).sum(axis=1) / nrm2
    assert_allclose(res.populations[:, 0], p_d, atol=1e-12)
