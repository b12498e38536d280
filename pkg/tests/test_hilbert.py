"""Operators, state construction, and the composite-space layout."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from vaet.errors import ConfigurationError, DomainError
from vaet.hilbert import (
    SystemParams,
    annihilation,
    build_coupling_operator,
    build_hamiltonian,
    donor_ground_state,
    lift_electronic,
    lift_vibrational,
    partial_trace_vibrational,
    position_operator,
    spectral_norm,
)


def test_annihilation_matrix_elements():
    b = annihilation(4)
    expect = np.zeros((4, 4))
    for n in range(1, 4):
        expect[n - 1, n] = np.sqrt(n)
    assert_allclose(b, expect)


def test_number_operator_from_annihilation():
    b = annihilation(5)
    n_op = b.conj().T @ b
    assert_allclose(np.diag(n_op), np.arange(5.0), atol=1e-14)


def test_position_operator_is_b_plus_bdag():
    b = annihilation(3)
    assert_allclose(position_operator(3), b + b.conj().T)


def test_bias_only_spectrum_oracle():
    # epsilon = 1, delta = 0, omega_v = 1, gamma = 0, two vibrational
    # levels: eigenvalues are +-1/2 + (n + 1/2), i.e. (1, 2, 0, 1) in the
    # electronic-major product order.
    params = SystemParams(epsilon=1.0, delta=0.0, omega_v=1.0, gamma=0.0,
                          fock_dim=2)
    h = build_hamiltonian(params)
    assert_allclose(np.diag(h), [1.0, 2.0, 0.0, 1.0], atol=1e-15)
    assert_allclose(h, np.diag(np.diag(h)), atol=1e-15)


def test_hamiltonian_hermitian():
    params = SystemParams(epsilon=0.3, delta=0.05, omega_v=0.2, gamma=0.07,
                          fock_dim=5)
    h = build_hamiltonian(params)
    assert_allclose(h, h.conj().T, atol=1e-15)


def test_spectrum_against_independent_diagonalization():
    # Cross-check the assembled matrix against a from-scratch build using
    # explicit Kronecker products.
    eps, delta, wv, g, nv = 0.25, 0.08, 0.15, 0.06, 4
    params = SystemParams(epsilon=eps, delta=delta, omega_v=wv, gamma=g,
                          fock_dim=nv)
    sz = np.diag([1.0, -1.0])
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    b = annihilation(nv)
    n_op = b.conj().T @ b
    x = b + b.conj().T
    ref = (0.5 * eps * np.kron(sz, np.eye(nv))
           + 0.5 * delta * np.kron(sx, np.eye(nv))
           + wv * np.kron(np.eye(2), n_op + 0.5 * np.eye(nv))
           + g * np.kron(sz, x))
    h = build_hamiltonian(params)
    assert_allclose(h, ref, atol=1e-14)
    assert_allclose(np.linalg.eigvalsh(h), np.linalg.eigvalsh(ref),
                    atol=1e-12)


def test_lift_operators_commute():
    a2 = np.array([[0.0, 1.0], [0.0, 0.0]])
    bn = annihilation(3)
    left = lift_electronic(a2, 3) @ lift_vibrational(bn)
    right = lift_vibrational(bn) @ lift_electronic(a2, 3)
    assert_allclose(left, right, atol=1e-15)


def test_coupling_operator_diagonal_is_sigma_z():
    l_op = build_coupling_operator("diagonal", 3)
    assert_allclose(l_op, np.kron(np.diag([1.0, -1.0]), np.eye(3)))
    assert_allclose(l_op @ l_op, np.eye(6), atol=1e-15)


def test_coupling_operator_offdiagonal_swaps_blocks():
    l_op = build_coupling_operator("offdiagonal", 4)
    assert_allclose(l_op, np.kron(np.array([[0.0, 1.0], [1.0, 0.0]]),
                                  np.eye(4)))


def test_coupling_operator_rejects_unknown_name():
    with pytest.raises(ConfigurationError):
        build_coupling_operator("sideways", 2)


def test_donor_ground_state_layout():
    psi = donor_ground_state(3)
    assert psi.shape == (6,)
    assert psi.dtype == np.complex128
    expect = np.zeros(6)
    expect[0] = 1.0
    assert_allclose(psi, expect)


def test_donor_state_has_positive_sz():
    psi = donor_ground_state(2)
    sz = build_coupling_operator("diagonal", 2)
    assert np.vdot(psi, sz @ psi).real == pytest.approx(1.0)


def test_partial_trace_reduces_product_state():
    nv = 3
    phi_el = np.array([0.6, 0.8j])
    phi_v = np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)
    psi = np.kron(phi_el, phi_v)
    rho = np.outer(psi, psi.conj())
    red = partial_trace_vibrational(rho, nv)
    assert_allclose(red, np.outer(phi_el, phi_el.conj()), atol=1e-14)
    assert np.trace(red).real == pytest.approx(1.0)


def test_partial_trace_preserves_trace_on_mixed_state(rng):
    nv = 4
    a = rng.normal(size=(2 * nv, 2 * nv)) + 1j * rng.normal(size=(2 * nv, 2 * nv))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    red = partial_trace_vibrational(rho, nv)
    assert np.trace(red) == pytest.approx(1.0)
    assert_allclose(red, red.conj().T, atol=1e-14)


def test_spectral_norm_matches_largest_eigenvalue():
    params = SystemParams(epsilon=0.4, delta=0.1, omega_v=0.3, gamma=0.05,
                          fock_dim=3)
    h = build_hamiltonian(params)
    assert spectral_norm(h) == pytest.approx(
        float(np.max(np.abs(np.linalg.eigvalsh(h)))), rel=1e-12)


def test_params_validation():
    with pytest.raises(ConfigurationError):
        SystemParams(epsilon=0.0, delta=0.0, omega_v=1.0, gamma=0.0,
                     fock_dim=0)
    with pytest.raises(DomainError):
        SystemParams(epsilon=0.0, delta=0.0, omega_v=-1.0, gamma=0.0,
                     fock_dim=2)
