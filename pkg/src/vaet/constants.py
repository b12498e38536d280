"""Physical constants and unit conventions.

Internal units: hbar = 1, energies in eV, times in eV^-1.
Conversion to picoseconds uses t_ps = t_internal * HBAR_EV_PS.
"""

# hbar in eV*ps: 6.582e-4 eV ps. 1 ps = 1/HBAR_EV_PS ~ 1519.3 eV^-1.
HBAR_EV_PS = 6.582e-4

# Boltzmann constant in eV/K.
KB_EV_PER_K = 8.617e-5

# Hard cap on the vibrational Fock-space truncation.
MAX_FOCK_DIM = 64


def kelvin_to_ev(temperature_k: float) -> float:
    """Thermal energy k_B T in eV for a temperature in kelvin."""
    return KB_EV_PER_K * temperature_k


def ev_inv_to_ps(t_ev_inv: float) -> float:
    """Convert an internal time (eV^-1) to picoseconds."""
    return t_ev_inv * HBAR_EV_PS


def ps_to_ev_inv(t_ps: float) -> float:
    """Convert picoseconds to internal time units (eV^-1)."""
    return t_ps / HBAR_EV_PS
