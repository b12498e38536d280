"""Ensemble propagation of the stochastic wavefunction solvers.

The reduced density matrix is the ensemble average of normalized projectors
|psi><psi|. Reproducibility contract: trajectory i draws its noise from
derive_seed(master_seed, i) (resampled trajectories extend the tuple with an
attempt counter), trajectories are reduced in fixed-size chunks, and chunk
partial sums are combined in chunk-index order, so results are bitwise
identical for any worker count and across repeated runs.

Colored-noise solvers consume normalized tables: the correlation function is
scaled to C(0) = 1, the noise to unit variance, and the coupling strength
gamma_E carries the physical magnitude. The scale of C therefore never
enters the dynamics, only its shape does.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .bath import BathSpec, CorrelationTable, correlation_function, memory_kernels
from .constants import HBAR_EV_PS
from .errors import ConfigurationError, EnsembleError
from .hilbert import SystemParams, build_hamiltonian, donor_ground_state, spectral_norm
from .noise import derive_seed, sample_noise, white_noise

_MAX_ATTEMPTS = 5
_MEM_TAIL_REL = 1e-3
_DT_NORM_BOUND = 0.1

SCHEMES = ("closed", "markov", "nonmarkov")
COUPLINGS = ("diagonal", "offdiagonal")


@dataclass(frozen=True)
class PropagatorConfig:
    """Integration controls shared by every scheme."""

    scheme: str
    dt: float | None
    n_steps: int
    n_traj: int
    master_seed: int
    renormalize_each_step: bool = True
    out_stride: int = 1
    n_workers: int = 1
    chunk_size: int = 25
    store_full_density: bool = False

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ConfigurationError(
                f"scheme must be one of {SCHEMES}, got {self.scheme!r}"
            )
        if self.n_steps < 1:
            raise ConfigurationError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.n_traj < 1:
            raise ConfigurationError(f"n_traj must be >= 1, got {self.n_traj}")
        if self.out_stride < 1 or self.n_steps % self.out_stride != 0:
            raise ConfigurationError(
                f"out_stride must divide n_steps ({self.n_steps}), "
                f"got {self.out_stride}"
            )
        if self.n_workers < 1:
            raise ConfigurationError(f"n_workers must be >= 1, got {self.n_workers}")
        if self.chunk_size < 1:
            raise ConfigurationError(f"chunk_size must be >= 1, got {self.chunk_size}")


@dataclass
class TrajectoryTables:
    """Precomputed per-ensemble inputs for the trajectory kernels.

    kind 'nm' carries the normalized correlation (truncated where the
    remaining kernel mass falls below one part in a thousand), its
    cumulative kernels on the half grid, and a noise factory returning
    unit-variance colored samples. Tests may inject raw (unnormalized)
    tables to drive the kernels directly.
    """

    kind: str
    dt: float
    gamma_e: float = 0.0
    c_hat: np.ndarray | None = None
    g0: np.ndarray | None = None
    g1: np.ndarray | None = None
    noise_factory: object = None


@dataclass
class EnsembleResult:
    """Averaged dynamics on the output grid t_k = k * dt * out_stride."""

    t: np.ndarray
    rho: np.ndarray
    populations: np.ndarray
    n_traj_used: int
    convergence_diag: dict
    scheme: str
    coupling: str
    dt: float

    @property
    def t_ps(self) -> np.ndarray:
        return self.t * HBAR_EV_PS

    @property
    def coherence(self) -> np.ndarray:
        if self.rho.shape[1] == 2:
            return self.rho[:, 0, 1]
        nv = self.rho.shape[1] // 2
        return np.einsum("tnn->t", self.rho[:, :nv, nv:])


def resolve_dt(system: SystemParams, dt: float | None) -> float:
    """Derive dt from the stability bound dt*||H|| <= 0.1, or validate it."""
    h_norm = spectral_norm(build_hamiltonian(system))
    if dt is None:
        if h_norm <= 0.0:
            raise ConfigurationError(
                "cannot derive dt for a zero Hamiltonian; set dt explicitly"
            )
        return _DT_NORM_BOUND / h_norm
    if dt <= 0.0:
        raise ConfigurationError(f"dt must be > 0, got {dt}")
    if dt * h_norm > _DT_NORM_BOUND * (1.0 + 1e-9):
        raise ConfigurationError(
            f"dt={dt:g} violates the stability bound dt*||H|| <= 0.1 "
            f"(||H|| = {h_norm:g}, max dt {_DT_NORM_BOUND / h_norm:g})"
        )
    return float(dt)


def validate_scheme_inputs(scheme: str, coupling: str,
                           bath: BathSpec | None) -> None:
    if coupling not in COUPLINGS:
        raise ConfigurationError(
            f"coupling must be one of {COUPLINGS}, got {coupling!r}"
        )
    if scheme == "closed":
        offending = []
        if bath is not None:
            if bath.gamma_E != 0.0:
                offending.append(f"gamma_E={bath.gamma_E:g}")
            if bath.alpha != 0.0:
                offending.append(f"alpha={bath.alpha:g}")
        if offending:
            raise ConfigurationError(
                "closed scheme admits no environment coupling; remove "
                + ", ".join(offending)
            )
    elif bath is None:
        raise ConfigurationError(f"{scheme} scheme requires a bath spec")


def assemble_tables(system: SystemParams, bath: BathSpec | None,
                    prop: PropagatorConfig, coupling: str) -> TrajectoryTables:
    dt = resolve_dt(system, prop.dt)
    if prop.scheme == "closed":
        return TrajectoryTables(kind="closed", dt=dt)
    if prop.scheme == "markov":
        n_steps = prop.n_steps
        t_grid = dt * np.arange(n_steps)

        def white_factory(seed: int) -> np.ndarray:
            return np.ascontiguousarray(white_noise(dt, t_grid, seed).z.real)

        return TrajectoryTables(kind="markov", dt=dt, gamma_e=bath.gamma_E,
                                noise_factory=white_factory)

    h = 0.5 * dt
    n_half = 2 * prop.n_steps + 1
    t_half = h * np.arange(n_half)
    corr = correlation_function(bath, t_half)
    c0 = corr.c0
    if c0 <= 0.0:
        # Vanishing spectral density: colored noise and memory terms are zero.
        zeros = np.zeros(n_half, dtype=np.complex128)

        def zero_factory(seed: int) -> np.ndarray:
            return np.zeros(n_half, dtype=np.complex128)

        return TrajectoryTables(kind="nm", dt=dt, gamma_e=bath.gamma_E,
                                c_hat=np.zeros(2, dtype=np.complex128),
                                g0=zeros, g1=zeros.copy(),
                                noise_factory=zero_factory)
    # Classical quadrature reduction: the trajectory equations see the
    # real quadrature of the correlation, normalized by C(0).  Drive,
    # conditional shift, and memory kernels all share this convention,
    # which keeps the stochastic coupling symmetric between the wells.
    c_hat = np.ascontiguousarray((corr.values.real / c0).astype(np.complex128))
    kern = memory_kernels(CorrelationTable(dt=h, values=c_hat))
    # The shift convolution drops lags whose remaining kernel mass
    # (tail integral of |c_hat|) is below 1e-3 of the total, which bounds
    # the relative shift error by the same fraction. A pointwise threshold
    # would never fire here: the finite-temperature ohmic correlation
    # decays only algebraically, so its tail stays above any fixed cut
    # over a whole run window while contributing nothing.
    tail_mass = np.cumsum(np.abs(c_hat.real)[::-1])[::-1]
    above = np.nonzero(tail_mass > _MEM_TAIL_REL * tail_mass[0])[0]
    mem_len = int(above[-1]) + 2 if len(above) else 2
    mem_len = min(max(mem_len, 2), n_half)
    sqrt_c0 = np.sqrt(c0)
    # Build the synthesis plan once, before workers share the cache.
    from .noise import synthesis_plan

    synthesis_plan(bath, t_half)

    # The trajectories are driven by the real quadrature of the complex
    # process, rescaled to unit variance: covariance Re C(t)/C(0), the
    # same table the kernels above integrate.
    drive_scale = np.sqrt(2.0) / sqrt_c0

    def colored_factory(seed: int) -> np.ndarray:
        z_re = sample_noise(bath, t_half, seed).z.real * drive_scale
        return np.ascontiguousarray(z_re.astype(np.complex128))

    return TrajectoryTables(kind="nm", dt=dt, gamma_e=bath.gamma_E,
                            c_hat=np.ascontiguousarray(c_hat[:mem_len]),
                            g0=np.ascontiguousarray(kern.g0),
                            g1=np.ascontiguousarray(kern.g1),
                            noise_factory=colored_factory)


def _run_single(h_mat, psi0, sq, system: SystemParams, prop: PropagatorConfig,
                coupling: str, tables: TrajectoryTables, seed: int):
    renorm = prop.renormalize_each_step
    if tables.kind == "closed":
        return kernels.run_closed(h_mat, psi0, tables.dt, prop.n_steps,
                                  prop.out_stride, renorm)
    if tables.kind == "markov":
        z_re = tables.noise_factory(seed)
        return kernels.run_markov(h_mat, psi0, z_re, tables.gamma_e,
                                  tables.dt, prop.out_stride, renorm,
                                  coupling == "offdiagonal")
    z_half = tables.noise_factory(seed)
    if coupling == "diagonal":
        return kernels.run_nm_diag(h_mat, psi0, z_half, tables.c_hat,
                                   tables.g0, tables.g1, tables.gamma_e,
                                   system.delta, tables.dt, prop.out_stride,
                                   renorm)
    return kernels.run_nm_offdiag(h_mat, psi0, z_half, tables.c_hat,
                                  tables.g0, tables.g1, sq, tables.gamma_e,
                                  system.epsilon, system.gamma, tables.dt,
                                  prop.out_stride, renorm)


def run_trajectory(system: SystemParams, bath: BathSpec | None,
                   prop: PropagatorConfig, coupling: str = "diagonal",
                   seed: int | None = None,
                   tables: TrajectoryTables | None = None):
    """One trajectory; returns (states (n_out, d), status)."""
    validate_scheme_inputs(prop.scheme, coupling, bath)
    if tables is None:
        tables = assemble_tables(system, bath, prop, coupling)
    h_mat = build_hamiltonian(system)
    psi0 = donor_ground_state(system.fock_dim)
    sq = np.sqrt(np.arange(1, system.fock_dim + 1, dtype=float))
    if seed is None:
        seed = derive_seed(prop.master_seed, 0)
    return _run_single(h_mat, psi0, sq, system, prop, coupling, tables, seed)


def _chunk_partial(chunk_idx, traj_indices, h_mat, psi0, sq, system, prop,
                   coupling, tables, de, nv):
    n_out = prop.n_steps // prop.out_stride + 1
    rho_sum = np.zeros((n_out, de, de), dtype=np.complex128)
    n_resampled = 0
    for idx in traj_indices:
        states = None
        for attempt in range(_MAX_ATTEMPTS):
            seed = (derive_seed(prop.master_seed, idx) if attempt == 0
                    else derive_seed(prop.master_seed, idx, attempt))
            out, status = _run_single(h_mat, psi0, sq, system, prop, coupling,
                                      tables, seed)
            if status == 0:
                states = out
                break
        if states is None:
            raise EnsembleError(
                f"trajectory {idx} failed {_MAX_ATTEMPTS} resampling attempts "
                f"(scheme={prop.scheme}, coupling={coupling})"
            )
        if attempt > 0:
            n_resampled += 1
        nrm2 = np.einsum("ti,ti->t", states, np.conj(states)).real
        if de == 2:
            blocks = states.reshape(n_out, 2, nv)
            contrib = np.einsum("tin,tjn->tij", blocks, np.conj(blocks))
        else:
            contrib = np.einsum("ti,tj->tij", states, np.conj(states))
        rho_sum += contrib / nrm2[:, None, None]
    return chunk_idx, rho_sum, n_resampled


def run_ensemble(system: SystemParams, bath: BathSpec | None,
                 prop: PropagatorConfig, coupling: str = "diagonal",
                 tables: TrajectoryTables | None = None) -> EnsembleResult:
    """Average prop.n_traj trajectories into the reduced density matrix."""
    validate_scheme_inputs(prop.scheme, coupling, bath)
    n_traj = 1 if prop.scheme == "closed" else prop.n_traj
    if tables is None:
        tables = assemble_tables(system, bath, prop, coupling)
    h_mat = build_hamiltonian(system)
    psi0 = donor_ground_state(system.fock_dim)
    nv = system.fock_dim
    sq = np.sqrt(np.arange(1, nv + 1, dtype=float))
    de = 2 * nv if prop.store_full_density else 2
    n_out = prop.n_steps // prop.out_stride + 1

    chunks = []
    for start in range(0, n_traj, prop.chunk_size):
        stop = min(start + prop.chunk_size, n_traj)
        chunks.append((len(chunks), list(range(start, stop))))

    results = {}
    if prop.n_workers == 1 or len(chunks) == 1:
        for chunk_idx, traj_indices in chunks:
            results[chunk_idx] = _chunk_partial(
                chunk_idx, traj_indices, h_mat, psi0, sq, system, prop,
                coupling, tables, de, nv)[1:]
    else:
        with ThreadPoolExecutor(max_workers=prop.n_workers) as pool:
            futs = [pool.submit(_chunk_partial, ci, ti, h_mat, psi0, sq,
                                system, prop, coupling, tables, de, nv)
                    for ci, ti in chunks]
            for fut in futs:
                ci, rho_sum, n_res = fut.result()
                results[ci] = (rho_sum, n_res)

    rho_total = np.zeros((n_out, de, de), dtype=np.complex128)
    n_resampled = 0
    chunk_pd = []
    for ci in range(len(chunks)):
        rho_sum, n_res = results[ci]
        rho_total += rho_sum
        n_resampled += n_res
        chunk_pd.append((rho_sum, len(chunks[ci][1])))

    if n_resampled > 0.01 * n_traj:
        raise EnsembleError(
            f"{n_resampled} of {n_traj} trajectories needed resampling "
            "(> 1%); the integration setup is unstable for these parameters"
        )

    rho = rho_total / n_traj
    if de == 2:
        populations = np.stack([rho[:, 0, 0].real, rho[:, 1, 1].real], axis=1)
    else:
        p_d = np.einsum("tnn->t", rho[:, :nv, :nv]).real
        p_a = np.einsum("tnn->t", rho[:, nv:, nv:]).real
        populations = np.stack([p_d, p_a], axis=1)

    # Block standard error of P_D from equal-size chunk means.
    full = [(rs, n) for rs, n in chunk_pd if n == prop.chunk_size]
    if len(full) >= 2:
        if de == 2:
            means = np.stack([(rs[:, 0, 0].real / n) for rs, n in full])
        else:
            means = np.stack(
                [np.einsum("tnn->t", rs[:, :nv, :nv]).real / n for rs, n in full])
        block_se = means.std(axis=0, ddof=1) / np.sqrt(len(full))
    else:
        block_se = np.zeros(n_out)

    dt = tables.dt
    return EnsembleResult(
        t=dt * prop.out_stride * np.arange(n_out),
        rho=rho,
        populations=populations,
        n_traj_used=n_traj,
        convergence_diag={
            "n_chunks": len(chunks),
            "chunk_size": prop.chunk_size,
            "n_full_chunks": len(full),
            "block_se_pd": block_se,
            "n_resampled": n_resampled,
            "backend": kernels.backend_name(),
        },
        scheme=prop.scheme,
        coupling=coupling,
        dt=dt,
    )
