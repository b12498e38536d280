"""Closed-form nonadiabatic rate with one quantized accepting mode.

The golden-rule rate for a biased two-state pair with electronic coupling
V = delta/2, a classical (solvent) reorganization energy lambda_s, and one
quantum mode (frequency omega_v, vibronic coupling gamma) is a thermally
weighted Franck-Condon progression:

  k = 2 pi V^2 (4 pi lambda_s k_B T)^(-1/2)
      * sum_m e^(-S) S^m / m!
        * exp[ -(eps - (lambda_s + lambda_v) + m omega_v)^2
               / (4 lambda_s k_B T) ]

with S = 2 gamma^2 / omega_v^2 and lambda_v = 2 gamma^2 / omega_v. All
energies in eV give k in eV; divide by hbar to get ps^-1.

The default line positions follow the source convention above. The
literature_convention flag instead centers line m at eps = lambda_s +
m omega_v (no lambda_v offset), the form common in the electron-transfer
literature; both are exact Gaussian combs and share the S = 0 limit
whenever gamma = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .constants import HBAR_EV_PS
from .errors import DomainError

_TERM_CUT = 1e-12
_MAX_TERMS = 2000


@dataclass(frozen=True)
class MJParams:
    """Inputs of the Franck-Condon rate comb (energies in eV, T in eV)."""

    epsilon: float
    delta: float
    gamma: float
    omega_v: float
    lambda_s: float
    temperature: float

    def __post_init__(self) -> None:
        if self.lambda_s <= 0.0:
            raise DomainError(
                f"lambda_s must be > 0 (the solvent Gaussian width "
                f"collapses otherwise), got {self.lambda_s}"
            )
        if self.temperature <= 0.0:
            raise DomainError(
                f"temperature must be > 0 (eV), got {self.temperature}"
            )
        if self.omega_v <= 0.0:
            raise DomainError(f"omega_v must be > 0, got {self.omega_v}")


def huang_rhys(gamma: float, omega_v: float) -> float:
    """S = 2 gamma^2 / omega_v^2 for the sigma_z (b + b') coupling."""
    if omega_v <= 0.0:
        raise DomainError(f"omega_v must be > 0, got {omega_v}")
    return 2.0 * gamma * gamma / (omega_v * omega_v)


def franck_condon_weights(s: float, m_max: int) -> np.ndarray:
    """Poisson progression e^-S S^m / m! for m = 0 .. m_max inclusive."""
    if s < 0.0:
        raise DomainError(f"Huang-Rhys factor must be >= 0, got {s}")
    if m_max < 0:
        raise DomainError(f"m_max must be >= 0, got {m_max}")
    w = np.empty(m_max + 1)
    w[0] = np.exp(-s)
    for m in range(m_max):
        w[m + 1] = w[m] * s / (m + 1)
    return w


def mj_rate_ev(params: MJParams, literature_convention: bool = False,
               m_max: int | None = None) -> float:
    """Rate in eV (energy units, hbar = 1).

    m_max pins the progression length exactly; by default the sum stops
    adaptively once past the Poisson peak with a negligible running term.
    """
    v = 0.5 * params.delta
    s = huang_rhys(params.gamma, params.omega_v)
    lam_v = s * params.omega_v
    width = 4.0 * params.lambda_s * params.temperature
    pref = 2.0 * np.pi * v * v / np.sqrt(np.pi * width)
    total = 0.0
    n_terms = _MAX_TERMS if m_max is None else m_max + 1
    fc = np.exp(-s)  # e^-S S^m / m!, updated multiplicatively
    for m in range(n_terms):
        if literature_convention:
            center = params.lambda_s + m * params.omega_v
        else:
            center = params.lambda_s + lam_v - m * params.omega_v
        term = fc * np.exp(-((params.epsilon - center) ** 2) / width)
        total += term
        fc *= s / (m + 1)
        # The Poisson weight peaks near m = S; stop once past it and the
        # running term is negligible.
        if m_max is None and m >= s and (term < _TERM_CUT * total
                                         or fc == 0.0):
            break
    return pref * total


def mj_rate(params: MJParams, literature_convention: bool = False,
            m_max: int | None = None) -> float:
    """Rate in ps^-1."""
    return mj_rate_ev(params, literature_convention, m_max) / HBAR_EV_PS


def mj_curve(params: MJParams, epsilon_grid,
             literature_convention: bool = False) -> np.ndarray:
    """Rates (ps^-1) over a grid of bias values."""
    eps = np.asarray(epsilon_grid, dtype=float)
    return np.array([
        mj_rate(replace(params, epsilon=float(e)), literature_convention)
        for e in eps
    ])


def mj_argmax(params: MJParams, epsilon_grid,
              literature_convention: bool = False) -> float:
    """Bias value maximizing the rate over the given grid."""
    eps = np.asarray(epsilon_grid, dtype=float)
    k = mj_curve(params, eps, literature_convention)
    return float(eps[int(np.argmax(k))])
