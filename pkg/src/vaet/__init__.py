"""Stochastic simulation of vibrationally assisted electron transfer.

A biased electronic two-level system couples to one quantized vibration
and, through stochastic Schrodinger equations, to a harmonic bath that
enters either as white noise or as colored noise with memory kernels.
The package covers closed, Markov, and non-Markov propagation, rate
extraction and parameter scans, the analytic vibronic rate comb, and a
small CLI for figure-style runs. Units are eV and eV^-1 with hbar = 1;
times convert to ps via HBAR_EV_PS.
"""

from .bath import (
    BathSpec,
    CorrelationTable,
    KernelTable,
    correlation_function,
    kernel_commutator_term,
    lambda_total,
    memory_kernels,
    reorganization_energy_bath,
    reorganization_energy_caption,
    reorganization_energy_mode,
    spectral_density,
)
from .config import RunConfig, canonical_dict, from_canonical, load_config, \
    parse_config
from .constants import HBAR_EV_PS, KB_EV_PER_K, ev_inv_to_ps, kelvin_to_ev, \
    ps_to_ev_inv
from .errors import (
    ConfigurationError,
    DataError,
    DomainError,
    EnsembleError,
    FitError,
    QuadratureError,
    VaetError,
)
from .hilbert import (
    SystemParams,
    build_coupling_operator,
    build_hamiltonian,
    donor_ground_state,
    partial_trace_vibrational,
)
from .kernels import backend_name
from .noise import (
    NoisePath,
    NoiseSelfTestReport,
    covariance_selftest,
    derive_seed,
    sample_noise,
    synthesis_plan,
    update_shifted_noise,
    white_noise,
)
from .observables import (
    PopulationTrace,
    RateFit,
    StationaryEstimate,
    estimate_stationary,
    extract_rate,
    populations,
)
from .propagator import (
    EnsembleResult,
    PropagatorConfig,
    TrajectoryTables,
    resolve_dt,
    run_ensemble,
    run_trajectory,
)
from .ratetheory import MJParams, franck_condon_weights, huang_rhys, \
    mj_argmax, mj_curve, mj_rate, mj_rate_ev
from .recipes import list_recipes, load_recipe, recipe_text
from .sweep import (
    RateMap,
    SweepSpec,
    activationless_bias,
    compare_to_mj,
    run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "BathSpec", "CorrelationTable", "KernelTable", "spectral_density",
    "correlation_function", "memory_kernels", "kernel_commutator_term",
    "reorganization_energy_bath", "reorganization_energy_caption",
    "reorganization_energy_mode", "lambda_total",
    "RunConfig", "canonical_dict", "from_canonical", "load_config",
    "parse_config",
    "HBAR_EV_PS", "KB_EV_PER_K", "kelvin_to_ev", "ev_inv_to_ps",
    "ps_to_ev_inv",
    "VaetError", "ConfigurationError", "DomainError", "QuadratureError",
    "DataError", "FitError", "EnsembleError",
    "SystemParams", "build_hamiltonian", "build_coupling_operator",
    "donor_ground_state", "partial_trace_vibrational",
    "backend_name",
    "NoisePath", "NoiseSelfTestReport", "derive_seed", "sample_noise",
    "synthesis_plan", "white_noise", "update_shifted_noise",
    "covariance_selftest",
    "PopulationTrace", "RateFit", "StationaryEstimate", "populations",
    "estimate_stationary", "extract_rate",
    "PropagatorConfig", "TrajectoryTables", "EnsembleResult", "resolve_dt",
    "run_trajectory", "run_ensemble",
    "MJParams", "franck_condon_weights", "huang_rhys", "mj_rate_ev",
    "mj_rate", "mj_curve", "mj_argmax",
    "list_recipes", "load_recipe", "recipe_text",
    "SweepSpec", "RateMap", "run_sweep", "activationless_bias",
    "compare_to_mj",
    "__version__",
]
