"""The compiled and pure-numpy integrator twins must agree bitwise-close."""

import numpy as np
import pytest

from vaet.bath import BathSpec
from vaet.hilbert import SystemParams, build_hamiltonian, donor_ground_state
from vaet.kernels import numpy_backend
from vaet.noise import derive_seed
from vaet.propagator import PropagatorConfig, assemble_tables

numba_backend = pytest.importorskip(
    "vaet.kernels.numba_backend",
    reason="numba backend unavailable; the numpy twin is the only backend")

SYSTEM = SystemParams(epsilon=0.1487, delta=1e-4, omega_v=0.1087, gamma=0.0,
                      fock_dim=2)
BATH = BathSpec(family="ohmic", alpha=5e-4, temperature=0.025, gamma_E=0.05,
                omega_c=0.5)


def _nm_case(coupling, n_steps=240, out_stride=4):
    prop = PropagatorConfig(scheme="nonmarkov", dt=0.4, n_steps=n_steps,
                            n_traj=1, master_seed=17, out_stride=out_stride)
    tables = assemble_tables(SYSTEM, BATH, prop, coupling)
    z = tables.noise_factory(derive_seed(17, 0))
    h_mat = build_hamiltonian(SYSTEM)
    psi0 = donor_ground_state(SYSTEM.fock_dim)
    return prop, tables, z, h_mat, psi0


def test_closed_backends_agree():
    h_mat = build_hamiltonian(SYSTEM)
    psi0 = donor_ground_state(SYSTEM.fock_dim)
    a, sa = numpy_backend.run_closed(h_mat, psi0, 0.3, 200, 2, True)
    b, sb = numba_backend.run_closed(h_mat, psi0, 0.3, 200, 2, True)
    assert sa == sb == 0
    assert a.shape == b.shape == (101, 4)
    assert np.max(np.abs(a - b)) < 1e-12


@pytest.mark.parametrize("coupling_x", [False, True])
@pytest.mark.parametrize("renorm", [True, False])
def test_markov_backends_agree(coupling_x, renorm):
    h_mat = build_hamiltonian(SYSTEM)
    psi0 = donor_ground_state(SYSTEM.fock_dim)
    rng = np.random.default_rng(5)
    dt = 0.3
    z_re = rng.standard_normal(400) / np.sqrt(dt)
    a, sa = numpy_backend.run_markov(h_mat, psi0, z_re, 0.05, dt, 4, renorm,
                                     coupling_x)
    b, sb = numba_backend.run_markov(h_mat, psi0, z_re, 0.05, dt, 4, renorm,
                                     coupling_x)
    assert sa == sb == 0
    assert np.max(np.abs(a - b)) < 1e-12


@pytest.mark.parametrize("coupling", ["diagonal", "offdiagonal"])
def test_nm_backends_agree(coupling):
    prop, tables, z, h_mat, psi0 = _nm_case(coupling)
    sq = np.sqrt(np.arange(1, SYSTEM.fock_dim + 1, dtype=float))
    if coupling == "diagonal":
        args = (h_mat, psi0, z, tables.c_hat, tables.g0, tables.g1,
                tables.gamma_e, SYSTEM.delta, tables.dt, prop.out_stride,
                True)
        a, sa = numpy_backend.run_nm_diag(*args)
        b, sb = numba_backend.run_nm_diag(*args)
    else:
        args = (h_mat, psi0, z, tables.c_hat, tables.g0, tables.g1, sq,
                tables.gamma_e, SYSTEM.epsilon, SYSTEM.gamma, tables.dt,
                prop.out_stride, True)
        a, sa = numpy_backend.run_nm_offdiag(*args)
        b, sb = numba_backend.run_nm_offdiag(*args)
    assert sa == sb == 0
    assert a.shape == b.shape
    assert np.max(np.abs(a - b)) < 1e-12


def test_markov_nan_noise_flags_failure():
    h_mat = build_hamiltonian(SYSTEM)
    psi0 = donor_ground_state(SYSTEM.fock_dim)
    z = np.full(50, np.nan)
    _, sa = numpy_backend.run_markov(h_mat, psi0, z, 0.05, 0.3, 1, True,
                                     False)
    _, sb = numba_backend.run_markov(h_mat, psi0, z, 0.05, 0.3, 1, True,
                                     False)
    assert sa == 1
    assert sb == 1


def test_nm_nan_noise_flags_failure():
    prop, tables, z, h_mat, psi0 = _nm_case("diagonal", n_steps=40,
                                            out_stride=1)
    bad = np.full_like(z, np.nan)
    _, sa = numpy_backend.run_nm_diag(h_mat, psi0, bad, tables.c_hat,
                                      tables.g0, tables.g1, tables.gamma_e,
                                      SYSTEM.delta, tables.dt, 1, True)
    _, sb = numba_backend.run_nm_diag(h_mat, psi0, bad, tables.c_hat,
                                      tables.g0, tables.g1, tables.gamma_e,
                                      SYSTEM.delta, tables.dt, 1, True)
    assert sa == 1
    assert sb == 1


def test_out_stride_subsamples_the_same_path():
    h_mat = build_hamiltonian(SYSTEM)
    psi0 = donor_ground_state(SYSTEM.fock_dim)
    rng = np.random.default_rng(6)
    dt = 0.3
    z_re = rng.standard_normal(120) / np.sqrt(dt)
    dense, _ = numpy_backend.run_markov(h_mat, psi0, z_re, 0.05, dt, 1, True,
                                        False)
    sparse, _ = numpy_backend.run_markov(h_mat, psi0, z_re, 0.05, dt, 6, True,
                                         False)
    assert np.max(np.abs(dense[::6] - sparse)) < 1e-14
