"""Hilbert-space setup: operators, Hamiltonian, states, partial traces.

Basis ordering is electronic-major: index = elec * fock_dim + n, with
elec = 0 the donor (sigma_z eigenvalue +1) and elec = 1 the acceptor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import MAX_FOCK_DIM
from .errors import ConfigurationError, DataError, DomainError

SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)


@dataclass(frozen=True)
class SystemParams:
    """Electronic-vibrational model parameters (energies in eV).

    epsilon : donor-acceptor energy bias
    delta   : electronic tunneling matrix element
    omega_v : vibrational mode frequency
    gamma   : electron-vibration coupling
    fock_dim: vibrational truncation (number of Fock states kept)
    """

    epsilon: float
    delta: float
    omega_v: float
    gamma: float
    fock_dim: int

    def __post_init__(self) -> None:
        if not (1 <= self.fock_dim <= MAX_FOCK_DIM):
            raise ConfigurationError(
                f"fock_dim must be in [1, {MAX_FOCK_DIM}], got {self.fock_dim}"
            )
        if self.omega_v < 0.0:
            raise DomainError(f"omega_v must be >= 0, got {self.omega_v}")

    @property
    def dim(self) -> int:
        return 2 * self.fock_dim


def annihilation(fock_dim: int) -> np.ndarray:
    """Truncated annihilation operator b with b|n> = sqrt(n)|n-1>."""
    b = np.zeros((fock_dim, fock_dim), dtype=np.complex128)
    for n in range(1, fock_dim):
        b[n - 1, n] = np.sqrt(n)
    return b


def position_operator(fock_dim: int) -> np.ndarray:
    """Dimensionless mode displacement x = b + b^dagger."""
    b = annihilation(fock_dim)
    return b + b.conj().T


def lift_electronic(op2: np.ndarray, fock_dim: int) -> np.ndarray:
    """Embed a 2x2 electronic operator as op2 (x) I_vib."""
    return np.kron(op2, np.eye(fock_dim, dtype=np.complex128))


def lift_vibrational(opn: np.ndarray) -> np.ndarray:
    """Embed a vibrational operator as I_el (x) opn."""
    return np.kron(np.eye(2, dtype=np.complex128), opn)


def build_hamiltonian(params: SystemParams) -> np.ndarray:
    """Full vibronic Hamiltonian on the 2*fock_dim product space.

    H = (epsilon/2) sigma_z + (delta/2) sigma_x
        + omega_v (b'b + 1/2) + gamma sigma_z (b + b').
    """
    n = params.fock_dim
    b = annihilation(n)
    number = b.conj().T @ b
    h_vib = params.omega_v * (number + 0.5 * np.eye(n))
    h = (
        0.5 * params.epsilon * lift_electronic(SIGMA_Z, n)
        + 0.5 * params.delta * lift_electronic(SIGMA_X, n)
        + lift_vibrational(h_vib)
        + params.gamma * np.kron(SIGMA_Z, b + b.conj().T)
    )
    return np.ascontiguousarray(h)


def build_coupling_operator(coupling: str, fock_dim: int) -> np.ndarray:
    """Bath-coupling operator: sigma_z (x) I for 'diagonal', sigma_x (x) I for
    'offdiagonal'. Both are Hermitian."""
    if coupling == "diagonal":
        return lift_electronic(SIGMA_Z, fock_dim)
    if coupling == "offdiagonal":
        return lift_electronic(SIGMA_X, fock_dim)
    raise ConfigurationError(
        f"coupling must be 'diagonal' or 'offdiagonal', got {coupling!r}"
    )


def donor_ground_state(fock_dim: int) -> np.ndarray:
    """|donor> (x) |n=0>, the standard initial condition."""
    psi = np.zeros(2 * fock_dim, dtype=np.complex128)
    psi[0] = 1.0
    return psi


def partial_trace_vibrational(rho: np.ndarray, fock_dim: int) -> np.ndarray:
    """Trace out the vibrational factor of a (2N x 2N) density matrix."""
    if rho.shape != (2 * fock_dim, 2 * fock_dim):
        raise DataError(
            f"density matrix shape {rho.shape} incompatible with "
            f"fock_dim {fock_dim}"
        )
    r = rho.reshape(2, fock_dim, 2, fock_dim)
    return np.einsum("injn->ij", r)


def spectral_norm(h: np.ndarray) -> float:
    """Largest singular value; for Hermitian H this is max |eigenvalue|."""
    return float(np.linalg.norm(h, 2))
