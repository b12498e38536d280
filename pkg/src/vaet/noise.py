"""Colored and white stochastic processes driving the trajectory solvers.

A complex Gaussian process with prescribed two-time correlation

  E[z*(t) z(t')] = C(t - t')

is synthesized as a two-branch frequency-comb sum

  z(t) = sum_k [ a_k xi_k exp(-i w_k t) + b_k eta_k exp(+i w_k t) ],

with independent circular complex Gaussians xi_k, eta_k and weights

  a_k^2 = (dw/pi) J(w_k) n(w_k),      b_k^2 = (dw/pi) J(w_k) (n(w_k) + 1),

n the Bose occupation. The comb lives on the FFT lattice w_k = k dw,
dw = 2 pi / (N_fft h), so both branches evaluate as length-N_fft FFTs.
Every synthesis plan is validated against the quadrature correlation
function before use; the frequency grid is doubled until the tabulated
covariance of the comb matches C(t) to tolerance, and failure to reach
tolerance raises instead of returning a biased process.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bath import BathSpec, correlation_function, j_over_omega, spectral_density
from .errors import ConfigurationError, DomainError, QuadratureError

_TAIL_CUT = 1e-4          # spectral support: keep modes above this fraction of peak
_SELFTEST_RTOL = 5e-3     # |C_model - C| tolerance relative to C(0)
_MAX_FFT = 2 ** 22


def derive_seed(master_seed: int, *indices: int) -> int:
    """Stable per-object seed from a master seed and an index tuple.

    The tuple length is folded in ahead of the indices: SeedSequence
    zero-pads short entropy lists to its pool size, so without the prefix
    (i,) and (i, 0) would seed identical streams.
    """
    seq = np.random.SeedSequence(
        [int(master_seed), len(indices), *[int(i) for i in indices]])
    return int(seq.generate_state(1, np.uint64)[0])


@dataclass
class NoisePath:
    """One realization on the uniform grid t_k = k*dt.

    z is the raw draw; shifted starts as a copy and is filled in place by
    update_shifted_noise as trajectory expectation values become available.
    """

    dt: float
    z: np.ndarray = field(repr=False)
    seed: int = 0
    shifted: np.ndarray = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.shifted is None:
            self.shifted = self.z.copy()


@dataclass(frozen=True)
class SynthesisPlan:
    """Frozen mode lattice for one (bath, grid) pair."""

    n_fft: int
    d_omega: float
    n_modes: int
    a_k: np.ndarray = field(repr=False)
    b_k: np.ndarray = field(repr=False)
    max_dev: float = 0.0


_SYNTH_CACHE: dict = {}


def _occupation_weights(spec: BathSpec, omega: np.ndarray) -> tuple:
    """(J*n, J*(n+1)) with the regular omega -> 0 limit (J/w)(0)*T."""
    t_k = spec.temperature
    x = omega / t_k
    jw = j_over_omega(spec, omega)
    j = spectral_density(spec, omega)
    # J*n = (J/w) * T * x/(e^x - 1); series below 1e-6 avoids 0/0.
    small = x < 1e-6
    safe = np.where(small, 1.0, x)
    bose_factor = np.where(small, 1.0 - x / 2.0, safe / np.expm1(safe))
    j_n = jw * t_k * bose_factor
    return j_n, j_n + j


def _support_cut(spec: BathSpec, h: float) -> float:
    """Largest frequency carrying weight above _TAIL_CUT of the peak."""
    from .bath import omega_max

    w_hi = omega_max(spec)
    grid = np.linspace(0.0, w_hi, 20001)
    j_n, j_np1 = _occupation_weights(spec, grid)
    w = np.maximum(j_n, j_np1)
    peak = float(np.max(w))
    if peak <= 0.0:
        return 0.0
    keep = np.nonzero(w >= _TAIL_CUT * peak)[0]
    return float(grid[keep[-1]]) if len(keep) else 0.0


def _plan_covariance(plan: SynthesisPlan, n_t: int) -> np.ndarray:
    """Exact E[z*(t_j) z(0)] of the comb, via FFTs of the squared weights."""
    a2 = np.zeros(plan.n_fft)
    b2 = np.zeros(plan.n_fft)
    a2[: plan.n_modes] = plan.a_k ** 2
    b2[: plan.n_modes] = plan.b_k ** 2
    # sum a_k^2 e^{+i w_k t_j} = conj(FFT(a2))[j];  sum b_k^2 e^{-i w_k t_j} = FFT(b2)[j]
    return (np.conj(np.fft.fft(a2)) + np.fft.fft(b2))[:n_t]


def synthesis_plan(spec: BathSpec, t_grid: np.ndarray,
                   n_modes: int | None = None) -> SynthesisPlan:
    """Build (or fetch) a validated mode lattice for the given time grid."""
    t = np.asarray(t_grid, dtype=float)
    if len(t) < 2:
        raise ConfigurationError("noise synthesis needs at least two grid points")
    h = float(t[1] - t[0])
    if h <= 0.0 or not np.allclose(np.diff(t), h, rtol=1e-9, atol=1e-12):
        raise ConfigurationError("noise synthesis requires a uniform t_grid")
    n_t = len(t)
    key = (spec, round(h, 12), n_t, n_modes)
    cached = _SYNTH_CACHE.get(key)
    if cached is not None:
        return cached

    target = correlation_function(spec, t).values
    c0 = float(target[0].real)
    w_cut = _support_cut(spec, h)
    if c0 <= 0.0 or w_cut <= 0.0:
        # Vanishing spectral density: the process is identically zero.
        plan = SynthesisPlan(n_fft=max(2 * n_t, 2), d_omega=0.0, n_modes=0,
                             a_k=np.zeros(0), b_k=np.zeros(0))
        _SYNTH_CACHE[key] = plan
        return plan

    # Start from a lattice that resolves the narrowest spectral feature and
    # spans at least twice the window (no periodic reuse inside the window).
    if spec.family == "structured":
        dw_feat = spec.beta / 6.0 if spec.beta > 0.0 else 0.0
    else:
        dw_feat = min(spec.omega_c, spec.temperature) / 8.0
    if dw_feat <= 0.0:
        raise QuadratureError(
            "noise synthesis cannot resolve a zero-width spectral line "
            f"(family={spec.family}, beta={spec.beta})"
        )
    n_fft = 2
    while n_fft < max(2 * n_t, int(np.ceil(2.0 * np.pi / (h * dw_feat)))):
        n_fft *= 2

    while True:
        d_omega = 2.0 * np.pi / (n_fft * h)
        n_req = min(int(np.floor(w_cut / d_omega)) + 1, n_fft - 1)
        if n_modes is not None and n_req > n_modes:
            raise ConfigurationError(
                f"n_modes={n_modes} is below the {n_req} modes required to "
                f"cover the spectral support (cut {w_cut:g} eV at spacing "
                f"{d_omega:g} eV)"
            )
        n_use = n_req if n_modes is None else min(n_modes, n_fft - 1)
        omega = d_omega * np.arange(n_use)
        j_n, j_np1 = _occupation_weights(spec, omega)
        a_k = np.sqrt(np.maximum(d_omega / np.pi * j_n, 0.0))
        b_k = np.sqrt(np.maximum(d_omega / np.pi * j_np1, 0.0))
        plan = SynthesisPlan(n_fft=n_fft, d_omega=d_omega, n_modes=n_use,
                             a_k=a_k, b_k=b_k)
        model = _plan_covariance(plan, n_t)
        dev = float(np.max(np.abs(model - target)))
        if c0 > 0.0 and dev <= _SELFTEST_RTOL * c0:
            plan = SynthesisPlan(n_fft=n_fft, d_omega=d_omega, n_modes=n_use,
                                 a_k=a_k, b_k=b_k, max_dev=dev)
            _SYNTH_CACHE[key] = plan
            return plan
        if n_fft >= _MAX_FFT:
            raise QuadratureError(
                "noise synthesis failed its covariance self-test: max "
                f"deviation {dev:.3e} vs tolerance {_SELFTEST_RTOL * c0:.3e} "
                f"at N_fft={n_fft} (step {h:g} eV^-1 covers frequencies only "
                f"up to {2.0 * np.pi / h:g} eV; spectral support ends at "
                f"{w_cut:g} eV)"
            )
        n_fft *= 2


def sample_noise(spec: BathSpec, t_grid: np.ndarray, seed: int,
                 n_modes: int | None = None) -> NoisePath:
    """Draw one colored-noise realization with covariance C(t - t')."""
    t = np.asarray(t_grid, dtype=float)
    plan = synthesis_plan(spec, t, n_modes)
    n_t = len(t)
    h = float(t[1] - t[0])
    rng = np.random.Generator(np.random.PCG64(seed))
    # Draw order is part of the reproducibility contract: xi first, then eta.
    xi = (rng.standard_normal(plan.n_modes)
          + 1j * rng.standard_normal(plan.n_modes)) / np.sqrt(2.0)
    eta = (rng.standard_normal(plan.n_modes)
           + 1j * rng.standard_normal(plan.n_modes)) / np.sqrt(2.0)
    c_a = np.zeros(plan.n_fft, dtype=np.complex128)
    c_b = np.zeros(plan.n_fft, dtype=np.complex128)
    c_a[: plan.n_modes] = plan.a_k * xi
    c_b[: plan.n_modes] = plan.b_k * eta
    # z[j] = sum_k c_a[k] e^{-2 pi i k j / N} + sum_k c_b[k] e^{+2 pi i k j / N}
    z = (np.fft.fft(c_a) + np.conj(np.fft.fft(np.conj(c_b))))[:n_t]
    return NoisePath(dt=h, z=np.ascontiguousarray(z), seed=int(seed))


def white_noise(dt: float, t_grid: np.ndarray, seed: int) -> NoisePath:
    """Real white noise with variance 1/dt per sample (Ito increments / dt)."""
    if dt <= 0.0:
        raise DomainError(f"dt must be > 0, got {dt}")
    n_t = len(np.asarray(t_grid))
    rng = np.random.Generator(np.random.PCG64(seed))
    z = rng.standard_normal(n_t) / np.sqrt(dt)
    return NoisePath(dt=float(dt), z=z.astype(np.complex128), seed=int(seed))


def update_shifted_noise(path: NoisePath, corr, l_expectations) -> complex:
    """Apply the memory drift shift at the newest step.

    The shifted process is z~(t_k) = z(t_k) + int_0^{t_k} C(t_k - s) u(s) ds
    with u the running adjoint-coupling expectation; the integral is a
    trapezoid over the samples provided. l_expectations must hold u at steps
    0..k; the call fills path.shifted[k] and returns it.
    """
    u = np.asarray(l_expectations, dtype=np.complex128)
    k = len(u) - 1
    if k < 0:
        raise DomainError("l_expectations must hold at least the t=0 value")
    if k >= len(path.z):
        raise DomainError(
            f"step {k} is outside the noise grid of {len(path.z)} samples"
        )
    c = np.asarray(corr.values, dtype=np.complex128)
    if k >= len(c):
        raise DomainError(
            f"step {k} is outside the correlation table of {len(c)} samples"
        )
    if k == 0:
        shift = 0.0 + 0.0j
    else:
        kernel = c[k::-1]  # C(t_k - s_j) for j = 0..k
        w = np.ones(k + 1)
        w[0] = w[-1] = 0.5
        shift = path.dt * np.sum(kernel * w * u)
    val = path.z[k] + shift
    path.shifted[k] = val
    return complex(val)


@dataclass(frozen=True)
class NoiseSelfTestReport:
    """Ensemble covariance check of the synthesized process."""

    n_paths: int
    n_lags: int
    band: float
    frac_within: float
    max_dev: float
    passed: bool
    t: np.ndarray = None
    target: np.ndarray = None
    empirical: np.ndarray = None


def covariance_selftest(spec: BathSpec, t_grid: np.ndarray, n_paths: int,
                        master_seed: int, min_frac: float = 0.99) -> NoiseSelfTestReport:
    """Compare the ensemble estimator E[z*(t) z(0)] against C(t).

    Passes when at least min_frac of the lags fall inside the statistical
    band 5 C(0) / sqrt(n_paths).
    """
    t = np.asarray(t_grid, dtype=float)
    target = correlation_function(spec, t).values
    c0 = float(target[0].real)
    acc = np.zeros(len(t), dtype=np.complex128)
    for m in range(n_paths):
        z = sample_noise(spec, t, derive_seed(master_seed, m)).z
        acc += np.conj(z) * z[0]
    est = acc / n_paths
    dev = np.abs(est - target)
    band = 5.0 * c0 / np.sqrt(n_paths)
    frac = float(np.mean(dev <= band))
    return NoiseSelfTestReport(
        n_paths=n_paths,
        n_lags=len(t),
        band=band,
        frac_within=frac,
        max_dev=float(np.max(dev)),
        passed=frac >= min_frac,
        t=t,
        target=target,
        empirical=est,
    )
